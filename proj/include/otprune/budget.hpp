#pragma once

#include <vector>

#include "otprune/net.hpp"
#include "otprune/tape.hpp"

// FLOPs-budgeted sparsity allocation: kept ratios are sigmoid(theta),
// trained against a squared penalty on the FLOPs fraction.

namespace otp::budget {

struct ArchDescriptor {
  std::vector<double> kernel_area;  // K_j, layer j = 1..N (dense: 1)
  std::vector<int> channels;        // n_0..n_N
  std::vector<double> map_area;     // A_j (dense: 1)
  int layers() const { return static_cast<int>(kernel_area.size()); }
};

struct BudgetSpec {
  double target = 0.5;   // B_F in (0, 1]
  double weight = 100.0; // penalty coefficient
};

// Dense stand-in: K_j = A_j = 1, channel chain from the layer shapes.
ArchDescriptor arch_from_network(const nn::Network& net);

// F(alpha): masked-to-full FLOPs ratio with alpha_0 fixed at 1.
// ratios has one kept ratio per layer (unmasked layers pass 1).
double flops_fraction(const std::vector<double>& ratios, const ArchDescriptor& arch);

// Differentiable version over a ratios vector node (length N).
int flops_fraction_node(ad::Tape& tape, int ratios, const ArchDescriptor& arch);

double budget_penalty(const std::vector<double>& ratios, const ArchDescriptor& arch,
                      const BudgetSpec& spec);
int budget_penalty_node(ad::Tape& tape, int ratios, const ArchDescriptor& arch,
                        const BudgetSpec& spec);

}  // namespace otp::budget
