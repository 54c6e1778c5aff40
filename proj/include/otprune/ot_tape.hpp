#pragma once

#include "otprune/ot.hpp"
#include "otprune/tape.hpp"

// Differentiable route through the OT update. The previous plan and dual
// enter the graph as constants, so gradients flow only through the cost
// matrix of the current step.

namespace otp::otg {

// n x 2 cost node: column 0 = s^2, column 1 = (s-1)^2.
int cost_matrix_node(ad::Tape& tape, int scores);

struct ProxNodes {
  int mask = -1;      // soft mask vector, m = n P[:,1]
  int log_plan = -1;  // n x 2 log-domain plan node
  int f = -1;
  int g = -1;
};

// Unrolls `inner_iters` Sinkhorn iterations on the proximal kernel.
// Requires 0 < k < n; degenerate budgets are pinned outside the tape.
ProxNodes proximal_step_nodes(ad::Tape& tape, int cost, const ot::PrunerState& state,
                              int inner_iters = 1);

// Next persistent state from evaluated graph nodes (values are detached and
// floored for storage).
ot::PrunerState advance_state(const ot::PrunerState& state, const ad::Tape& tape,
                              const ProxNodes& nodes);

}  // namespace otp::otg
