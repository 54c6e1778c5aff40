#include "otprune/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "otprune/kernels.hpp"

namespace otp::ot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : -kInf; }

// Indices of the k kept rows under the shared tie rule (higher index wins).
std::vector<char> keep_flags(const std::vector<double>& scores, int k) {
  const int n = static_cast<int>(scores.size());
  if (k < 0 || k > n) throw std::invalid_argument("k out of range [0, n]");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (scores[i] != scores[j]) return scores[i] < scores[j];
    return i < j;
  });
  std::vector<char> keep(n, 0);
  for (int r = n - k; r < n; ++r) keep[order[r]] = 1;
  return keep;
}

void require_shapes(const TransportPlan& plan, const CostMatrix& cost) {
  if (plan.n != cost.n) throw std::invalid_argument("plan/cost shape mismatch");
}
}  // namespace

double TransportPlan::mass(int i, int j) const {
  const double lm = log_at(i, j);
  return lm == -kInf ? 0.0 : std::exp(lm);
}

double TransportPlan::total_mass() const {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += mass(i, 0) + mass(i, 1);
  return acc;
}

std::array<double, 2> TransportPlan::col_sums() const {
  std::array<double, 2> s{0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    s[0] += mass(i, 0);
    s[1] += mass(i, 1);
  }
  return s;
}

std::vector<double> TransportPlan::row_sums() const {
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = mass(i, 0) + mass(i, 1);
  return s;
}

MarginalPair make_marginals(int n, int k) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (k < 0 || k > n) throw std::invalid_argument("k out of range [0, n]");
  MarginalPair m;
  m.n = n;
  m.k = k;
  m.a.assign(n, 1.0 / n);
  m.b = {static_cast<double>(n - k) / n, static_cast<double>(k) / n};
  return m;
}

CostMatrix build_cost_matrix(const std::vector<double>& scores) {
  CostMatrix c;
  c.n = static_cast<int>(scores.size());
  if (c.n < 1) throw std::invalid_argument("non-finite input");
  c.v.resize(2 * static_cast<std::size_t>(c.n));
  for (int i = 0; i < c.n; ++i) {
    const double s = scores[i];
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite input");
    c.v[2 * static_cast<std::size_t>(i)] = s * s;
    c.v[2 * static_cast<std::size_t>(i) + 1] = (s - 1.0) * (s - 1.0);
  }
  return c;
}

TransportPlan exact_topk_plan(const std::vector<double>& scores, int k) {
  const int n = static_cast<int>(scores.size());
  const auto keep = keep_flags(scores, k);
  TransportPlan p;
  p.n = n;
  p.log_mass.assign(2 * static_cast<std::size_t>(n), -kInf);
  const double cell = std::log(1.0 / n);
  for (int i = 0; i < n; ++i) p.log_mass[2 * static_cast<std::size_t>(i) + (keep[i] ? 1 : 0)] = cell;
  return p;
}

MaskVector plan_to_mask(const TransportPlan& plan) {
  const int n = plan.n;
  const double cell = std::log(1.0 / n);
  bool hard = true;
  for (double lm : plan.log_mass) {
    if (lm != -kInf && lm != cell) {
      hard = false;
      break;
    }
  }
  MaskVector m;
  m.hard = hard;
  m.values.resize(n);
  for (int i = 0; i < n; ++i) {
    m.values[i] = hard ? (plan.log_at(i, 1) == cell ? 1.0 : 0.0) : n * plan.mass(i, 1);
  }
  return m;
}

MaskVector hard_topk_mask(const std::vector<double>& scores, int k) {
  const int n = static_cast<int>(scores.size());
  MaskVector m;
  m.hard = true;
  if (k == 0) {
    m.values.assign(n, 0.0);
    return m;
  }
  if (k == n) {
    m.values.assign(n, 1.0);
    return m;
  }
  const auto keep = keep_flags(scores, k);
  m.values.resize(n);
  for (int i = 0; i < n; ++i) m.values[i] = keep[i] ? 1.0 : 0.0;
  return m;
}

double transport_cost(const TransportPlan& plan, const CostMatrix& cost) {
  require_shapes(plan, cost);
  double acc = 0.0;
  for (int i = 0; i < plan.n; ++i)
    for (int j = 0; j < 2; ++j) acc += cost.at(i, j) * plan.mass(i, j);
  return acc;
}

double plan_entropy(const TransportPlan& plan) {
  double acc = 0.0;
  for (double lm : plan.log_mass) {
    if (lm == -kInf) continue;
    const double p = std::exp(lm);
    if (p == 0.0) continue;
    acc -= p * (lm - 1.0);
  }
  return acc;
}

double dual_objective(const DualPotentials& duals, const CostMatrix& cost,
                      const MarginalPair& marginals, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  const int n = cost.n;
  double value = 0.0;
  for (int i = 0; i < n; ++i) value += duals.f[i] * marginals.a[i];
  for (int j = 0; j < 2; ++j) {
    if (marginals.b[j] > 0.0) value += duals.g[j] * marginals.b[j];
  }
  // Third term via log-sum-exp of the exponents so large potentials cannot
  // overflow intermediate products.
  std::vector<double> expo;
  expo.reserve(2 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) expo.push_back((duals.f[i] + duals.g[j] - cost.at(i, j)) / epsilon);
  const double lse = kern::logsumexp(expo.data(), static_cast<int>(expo.size()));
  return value - epsilon * std::exp(lse);
}

namespace {

// Shared update loop body: given log-kernel, compute f then g; returns the
// row-marginal violation of the implied plan (columns are exact after g).
struct UpdateScratch {
  std::vector<double> f;        // n
  std::array<double, 2> g{};    // current g
  std::vector<double> buf;      // n x 2 workspace of log terms
};

double fg_update(const std::vector<double>& k_log, int n, double epsilon,
                 const std::vector<double>& log_a, const std::array<double, 2>& log_b,
                 UpdateScratch& s) {
  // f_i = eps (log a_i - LSE_j (K_ij + g_j / eps))
  for (int i = 0; i < n; ++i) {
    const std::size_t r = 2 * static_cast<std::size_t>(i);
    s.buf[r] = k_log[r] + s.g[0] / epsilon;
    s.buf[r + 1] = k_log[r + 1] + s.g[1] / epsilon;
    s.f[i] = epsilon * (log_a[i] - kern::logsumexp(s.buf.data() + r, 2));
  }
  // g_j = eps (log b_j - LSE_i (K_ij + f_i / eps))
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < n; ++i) s.buf[i] = k_log[2 * static_cast<std::size_t>(i) + j] + s.f[i] / epsilon;
    s.g[j] = epsilon * (log_b[j] - kern::logsumexp(s.buf.data(), n));
  }
  // Row violation of P = e^{f/eps} K e^{g/eps}.
  double viol = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::size_t r = 2 * static_cast<std::size_t>(i);
    double row = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double lp = s.f[i] / epsilon + k_log[r + j] + s.g[j] / epsilon;
      row += lp == -kInf ? 0.0 : std::exp(lp);
    }
    viol = std::max(viol, std::fabs(row - 1.0 / n));
  }
  return viol;
}

TransportPlan assemble_plan(const std::vector<double>& k_log, int n, double epsilon,
                            const UpdateScratch& s, bool floor_storage) {
  TransportPlan p;
  p.n = n;
  p.log_mass.resize(2 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) {
      const std::size_t c = 2 * static_cast<std::size_t>(i) + j;
      double lp = s.f[i] / epsilon + k_log[c] + s.g[j] / epsilon;
      if (floor_storage && lp < kLogFloor) lp = kLogFloor;
      p.log_mass[c] = lp;
    }
  }
  return p;
}

}  // namespace

SinkhornResult sinkhorn_solve(const CostMatrix& cost, const MarginalPair& marginals,
                              double epsilon, double tol, int max_iter,
                              std::array<double, 2> g0) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
  const int n = cost.n;
  if (marginals.n != n) throw std::invalid_argument("marginals/cost shape mismatch");

  std::vector<double> k_log(2 * static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < k_log.size(); ++c) k_log[c] = std::max(-cost.v[c] / epsilon, kLogFloor);

  std::vector<double> log_a(n);
  for (int i = 0; i < n; ++i) log_a[i] = safe_log(marginals.a[i]);
  const std::array<double, 2> log_b{safe_log(marginals.b[0]), safe_log(marginals.b[1])};

  UpdateScratch s;
  s.f.assign(n, 0.0);
  s.g = g0;
  s.buf.assign(2 * static_cast<std::size_t>(n), 0.0);

  SinkhornResult res;
  for (int t = 1; t <= max_iter; ++t) {
    res.marginal_violation = fg_update(k_log, n, epsilon, log_a, log_b, s);
    res.iterations = t;
    if (res.marginal_violation < tol) {
      res.converged = true;
      break;
    }
  }
  res.plan = assemble_plan(k_log, n, epsilon, s, /*floor_storage=*/false);
  res.duals.f = s.f;
  res.duals.g = s.g;
  return res;
}

PrunerState init_pruner_state(int n, int k, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  PrunerState st;
  st.epsilon = epsilon;
  st.step = 1;
  st.g = {1.0, 1.0};
  st.marginals = make_marginals(n, k);
  st.plan.n = n;
  st.plan.log_mass.assign(2 * static_cast<std::size_t>(n), std::log(1.0 / (2.0 * n)));
  return st;
}

PrunerState proximal_step(const PrunerState& state, const CostMatrix& cost,
                          const ProximalOptions& opts) {
  const int n = state.plan.n;
  require_shapes(state.plan, cost);
  if (opts.inner_iters < 1 && opts.inner_tol <= 0.0)
    throw std::invalid_argument("proximal_step: need inner_iters >= 1 or inner_tol > 0");
  const double epsilon = state.epsilon;

  std::vector<double> k_log(2 * static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < k_log.size(); ++c)
    k_log[c] = std::max(-cost.v[c] / epsilon + state.plan.log_mass[c], kLogFloor);
  for (int j = 0; j < 2; ++j) {
    if (kern::logsumexp(k_log.data() + j, n, 2) == -kInf)
      throw std::runtime_error("degenerate kernel");
  }

  std::vector<double> log_a(n);
  for (int i = 0; i < n; ++i) log_a[i] = safe_log(state.marginals.a[i]);
  const std::array<double, 2> log_b{safe_log(state.marginals.b[0]), safe_log(state.marginals.b[1])};

  UpdateScratch s;
  s.f.assign(n, 0.0);
  s.g = state.g;
  s.buf.assign(2 * static_cast<std::size_t>(n), 0.0);

  const bool oracle = opts.inner_tol > 0.0;
  const int limit = oracle ? opts.max_inner : opts.inner_iters;
  for (int t = 1; t <= limit; ++t) {
    const double viol = fg_update(k_log, n, epsilon, log_a, log_b, s);
    if (oracle && viol < opts.inner_tol) break;
  }

  PrunerState next;
  next.epsilon = epsilon;
  next.step = state.step + 1;
  next.marginals = state.marginals;
  next.g = s.g;
  next.plan = assemble_plan(k_log, n, epsilon, s, /*floor_storage=*/true);
  return next;
}

}  // namespace otp::ot
