#pragma once

#include <array>
#include <vector>

// Optimal transport between n importance scores and the two mask values
// {0, 1}. Column 0 carries mask value 0 with mass (n-k)/n, column 1 carries
// mask value 1 with mass k/n; the k largest scores map to column 1. Plans
// and kernels live in log domain with entries floored at kLogFloor so that
// repeated proximal products never zero out a cell permanently.

namespace otp::ot {

inline constexpr double kLogFloor = -700.0;

struct CostMatrix {
  int n = 0;
  std::vector<double> v;  // n x 2 row-major: v[2i] = s_i^2, v[2i+1] = (s_i - 1)^2
  double at(int i, int j) const { return v[2 * static_cast<std::size_t>(i) + j]; }
};

struct MarginalPair {
  int n = 0;
  int k = 0;
  std::vector<double> a;      // uniform 1/n
  std::array<double, 2> b{};  // {(n-k)/n, k/n}
};

struct TransportPlan {
  int n = 0;
  std::vector<double> log_mass;  // n x 2 row-major; -inf = zero mass
  double log_at(int i, int j) const { return log_mass[2 * static_cast<std::size_t>(i) + j]; }
  double mass(int i, int j) const;
  double total_mass() const;
  std::array<double, 2> col_sums() const;
  std::vector<double> row_sums() const;
};

struct DualPotentials {
  std::vector<double> f;
  std::array<double, 2> g{};
};

struct MaskVector {
  std::vector<double> values;
  bool hard = false;
};

// Persistent OT state threaded through training (one per mask site).
struct PrunerState {
  double epsilon = 1.0;
  long step = 1;
  TransportPlan plan;
  std::array<double, 2> g{1.0, 1.0};
  MarginalPair marginals;
};

struct SinkhornResult {
  TransportPlan plan;
  DualPotentials duals;
  int iterations = 0;
  double marginal_violation = 0.0;
  bool converged = false;
};

struct ProximalOptions {
  int inner_iters = 1;     // Sinkhorn iterations on the proximal kernel per step
  double inner_tol = 0.0;  // if > 0, iterate to this row-marginal violation instead
  int max_inner = 200000;
};

MarginalPair make_marginals(int n, int k);

CostMatrix build_cost_matrix(const std::vector<double>& scores);

// Sparse plan of Eq-style hard assignment: k largest scores carry their 1/n
// row mass in column 1. Ties break by index; the higher index is kept.
TransportPlan exact_topk_plan(const std::vector<double>& scores, int k);

// m_i = n * P_{i1} (keep column); hard iff every cell is exactly 0 or 1/n.
MaskVector plan_to_mask(const TransportPlan& plan);

// Sorting reference for the top-k mask; same tie rule as exact_topk_plan.
MaskVector hard_topk_mask(const std::vector<double>& scores, int k);

double transport_cost(const TransportPlan& plan, const CostMatrix& cost);

// H(P) = -sum_ij P_ij (log P_ij - 1); empty cells contribute 0.
double plan_entropy(const TransportPlan& plan);

// <f,a> + <g,b> - eps <e^{f/eps}, e^{-C/eps} e^{g/eps}>, evaluated in log
// domain. Entries with b_j = 0 contribute 0 to <g,b>.
double dual_objective(const DualPotentials& duals, const CostMatrix& cost,
                      const MarginalPair& marginals, double epsilon);

// Full-convergence Sinkhorn on the fresh Gibbs kernel e^{-C/eps}. The
// convergence metric is the L-inf row-marginal violation after the g-update
// (columns are exact there by construction).
SinkhornResult sinkhorn_solve(const CostMatrix& cost, const MarginalPair& marginals,
                              double epsilon, double tol = 1e-12, int max_iter = 100000,
                              std::array<double, 2> g0 = {0.0, 0.0});

// Algorithm state at step 1: uniform plan with total mass 1, g = [1, 1].
PrunerState init_pruner_state(int n, int k, double epsilon);

// One Bregman proximal update: kernel K = e^{-C/eps} .* P_prev in log
// domain, then f-update, g-update, new plan. Column marginals equal b to
// rounding after the g-update.
PrunerState proximal_step(const PrunerState& state, const CostMatrix& cost,
                          const ProximalOptions& opts = {});

}  // namespace otp::ot
