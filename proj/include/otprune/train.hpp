#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "otprune/budget.hpp"
#include "otprune/net.hpp"
#include "otprune/ot.hpp"

namespace otp::train {

// Raised when training hits a non-finite loss; carries the step index.
struct NumericalError : std::runtime_error {
  long step;
  NumericalError(const std::string& what, long step_index)
      : std::runtime_error(what), step(step_index) {}
};

struct LrSchedule {
  enum class Kind { kCosine, kConstant, kMultistep };
  Kind kind = Kind::kCosine;
  double base = 0.1;
  std::vector<long> milestones;  // multistep: lr = values[i] from milestones[i] on
  std::vector<double> values;
  double at(long step, long total_steps) const;
};

struct SgdConfig {
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// v = momentum v + (grad + wd p); p -= lr v.
void sgd_update(std::vector<double>& param, const std::vector<double>& grad,
                std::vector<double>& vel, double lr, double momentum, double wd);

struct SparsitySpec {
  enum class Kind { kPerLayer, kGlobal };
  Kind kind = Kind::kPerLayer;
  std::vector<double> ratios;  // per masked site; size 1 broadcasts
  double global_ratio = 0.0;
};

// Keep count from a pruning ratio: k = n - round(ratio * n), half away
// from zero, clamped to [0, n].
int ratio_to_k(double ratio, int n);

struct BudgetSettings {
  budget::BudgetSpec spec;
  double theta_lr = 0.05;
  std::vector<double> kernel_area;  // optional overrides; default all 1
  std::vector<double> map_area;
};

struct PruneConfig {
  nn::MaskKind mode = nn::MaskKind::kPerUnit;
  SparsitySpec sparsity;
  double epsilon = 1.0;
  long prune_steps = 1000;
  long finetune_steps = 0;
  int batch_size = 64;
  std::uint64_t seed = 1;
  SgdConfig sgd;
  SgdConfig finetune_sgd;
  bool mask_first_layer = false;
  int inner_sinkhorn_steps = 1;
  long metrics_every = 1;
  long eval_every = 0;  // 0 = evaluate only at stage end
  std::optional<BudgetSettings> budget;
};

struct StepRecord {
  long step = 0;
  std::string stage;  // "prune" | "finetune"
  double loss = 0.0;
  double hardness = 0.0;  // mean |m - round(m)| over all site masks
  double lr = 0.0;
  std::vector<double> scores;  // concatenated site scores (prune stage)
  std::vector<double> masks;   // concatenated site masks (prune stage)
  double flops_fraction = -1.0;  // budget mode only
};

struct EvalRecord {
  long step = 0;
  std::string stage;
  double accuracy = 0.0;
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  double ot_seconds = 0.0;  // wall clock of the OT graph portion; not serialized
};

// One mask site: a masked layer, or the whole concatenation in global mode.
struct SiteInfo {
  int layer = -1;  // -1 for the single global site
  int offset = 0;  // offset into the concatenated mask (global mode)
  int n = 0;
};

struct SiteLayout {
  bool global = false;
  std::vector<SiteInfo> sites;      // per masked layer
  std::vector<int> keep_counts;     // per OT problem (per site, or size 1 global)
  int total_units = 0;
};

SiteLayout make_site_layout(const nn::Network& net, const SparsitySpec& sparsity);

using Observer = std::function<void(long step, const nn::Network& net,
                                    const std::vector<std::vector<double>>& site_masks)>;

struct TrainResult {
  nn::Network net;
  std::vector<ot::PrunerState> states;  // one per OT problem
  SiteLayout layout;
  RunMetrics metrics;
  std::vector<std::vector<double>> final_masks;  // per masked layer
  double mask_norm_correlation = 0.0;            // structured sites, pooled
  double final_hardness = 0.0;
  double flops_fraction = -1.0;  // budget mode
  std::vector<double> theta;     // budget mode
};

// Algorithm-1 loop: per step, proximal OT update per site -> soft masks ->
// masked forward -> loss -> SGD on weights and scores.
TrainResult prune_train(const nn::Network& net, const nn::Dataset& data,
                        const PruneConfig& config, const nn::Dataset* eval_data = nullptr,
                        const Observer& observer = {});

// Keeps, per site, the k units with the largest soft-mask values (ties to
// the higher index) and drops the rest physically; per-weight sites zero
// the pruned weights instead.
nn::Network derive_architecture(const nn::Network& net, const SiteLayout& layout,
                                const std::vector<std::vector<double>>& site_masks);

// Per masked layer, the indices kept by derive_architecture.
std::vector<std::vector<int>> kept_units(const nn::Network& net, const SiteLayout& layout,
                                         const std::vector<std::vector<double>>& site_masks);

// Plain SGD on the pruned network; no masks, no scores.
struct FinetuneResult {
  nn::Network net;
  RunMetrics metrics;
};
FinetuneResult finetune(const nn::Network& net, const nn::Dataset& data,
                        const PruneConfig& config, const nn::Dataset* eval_data = nullptr);

struct AblationRow {
  int inner_steps = 0;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double ot_seconds_mean = 0.0;
};

// Reruns the full pipeline for each inner-step count over `n_seeds` seeds.
std::vector<AblationRow> sinkhorn_steps_ablation(const std::vector<int>& hidden,
                                                 const nn::Dataset& data,
                                                 const nn::Dataset& eval_data,
                                                 const PruneConfig& config,
                                                 const std::vector<int>& steps_list,
                                                 int n_seeds = 3);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace otp::train
