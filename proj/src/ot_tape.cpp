#include "otprune/ot_tape.hpp"

#include <cmath>
#include <stdexcept>

namespace otp::otg {

int cost_matrix_node(ad::Tape& tape, int scores) {
  const int c0 = tape.square(scores);
  const int c1 = tape.square(tape.add_const(scores, -1.0));
  return tape.stack_cols(c0, c1);
}

ProxNodes proximal_step_nodes(ad::Tape& tape, int cost, const ot::PrunerState& state,
                              int inner_iters) {
  const int n = state.plan.n;
  if (inner_iters < 1) throw std::invalid_argument("proximal_step_nodes: inner_iters >= 1");
  if (state.marginals.k <= 0 || state.marginals.k >= n)
    throw std::invalid_argument("proximal_step_nodes: requires 0 < k < n");
  const double eps = state.epsilon;

  ad::Tensor prev(n, 2);
  for (int i = 0; i < 2 * n; ++i) prev.v[i] = std::max(state.plan.log_mass[i], ot::kLogFloor);
  const int prev_node = tape.constant(std::move(prev));

  ad::Tensor log_a(n, 1, std::log(1.0 / n));
  const int log_a_node = tape.constant(std::move(log_a));
  const int log_b_node = tape.constant(ad::Tensor::vector(
      {std::log(state.marginals.b[0]), std::log(state.marginals.b[1])}));

  const int kernel = tape.clamp_min(tape.add(tape.scale(cost, -1.0 / eps), prev_node),
                                    ot::kLogFloor);

  int g_cur = tape.constant(ad::Tensor::vector({state.g[0], state.g[1]}));
  int f_cur = -1;
  for (int it = 0; it < inner_iters; ++it) {
    f_cur = tape.scale(
        tape.sub(log_a_node, tape.lse_rows(tape.add_row(kernel, tape.scale(g_cur, 1.0 / eps)))),
        eps);
    g_cur = tape.scale(
        tape.sub(log_b_node, tape.lse_cols(tape.add_col(kernel, tape.scale(f_cur, 1.0 / eps)))),
        eps);
  }

  ProxNodes out;
  out.f = f_cur;
  out.g = g_cur;
  out.log_plan = tape.add_col(tape.add_row(kernel, tape.scale(g_cur, 1.0 / eps)),
                              tape.scale(f_cur, 1.0 / eps));
  out.mask = tape.scale(tape.exp(tape.col(out.log_plan, 1)), static_cast<double>(n));
  return out;
}

ot::PrunerState advance_state(const ot::PrunerState& state, const ad::Tape& tape,
                              const ProxNodes& nodes) {
  ot::PrunerState next;
  next.epsilon = state.epsilon;
  next.step = state.step + 1;
  next.marginals = state.marginals;
  const ad::Tensor& g = tape.value(nodes.g);
  next.g = {g.v[0], g.v[1]};
  const ad::Tensor& lp = tape.value(nodes.log_plan);
  next.plan.n = state.plan.n;
  next.plan.log_mass.resize(lp.v.size());
  for (std::size_t i = 0; i < lp.v.size(); ++i)
    next.plan.log_mass[i] = std::max(lp.v[i], ot::kLogFloor);
  return next;
}

}  // namespace otp::otg
