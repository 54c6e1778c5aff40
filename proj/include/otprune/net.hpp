#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "otprune/rng.hpp"
#include "otprune/tape.hpp"

namespace otp::nn {

// Raised on dataset/file problems; the CLI maps it to its data exit code.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MaskKind { kNone, kPerUnit, kPerWeight };

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in row-major; row j produces output unit j
  std::vector<double> b;  // out
  MaskKind site = MaskKind::kNone;
  std::vector<double> scores;  // trainable, structured sites only (length out)
};

// Dense stack with ReLU between layers and raw logits at the end.
struct Network {
  std::vector<DenseLayer> layers;
  int input_dim() const { return layers.front().in; }
  int output_dim() const { return layers.back().out; }
  long param_count() const;
};

struct Dataset {
  int n_features = 0;
  int n_classes = 0;
  int rows = 0;
  std::vector<double> x;  // rows x n_features
  std::vector<int> y;     // rows
};

// He-initialized network over the full size chain (input, hidden..., output).
Network make_network(const std::vector<int>& sizes, Rng& rng);

// Structured sites go on every hidden layer; the first layer is skipped
// unless mask_first_layer. Unstructured sites cover all layers. The output
// layer never gets a structured site.
void assign_mask_sites(Network& net, MaskKind kind, bool mask_first_layer);

// Indices of layers carrying a mask site.
std::vector<int> mask_site_layers(const Network& net);

// score_j = L2 norm of weight row j.
std::vector<double> init_scores_structured(const DenseLayer& layer);

// |w| flattened row-major; tied to the current weights, not trainable.
std::vector<double> scores_unstructured(const DenseLayer& layer);

// Plain forward; masks[l] is empty for unmasked layers, else the site mask
// (per-unit: length out, per-weight: length out*in). Shares the tape's
// kernels so both routes produce bit-identical arithmetic.
std::vector<double> forward_masked(const Network& net, const double* x, int batch,
                                   const std::vector<std::vector<double>>& masks);
std::vector<double> forward(const Network& net, const double* x, int batch);

// Mean softmax cross-entropy of plain logits.
double cross_entropy_loss(const std::vector<double>& logits, int batch, int classes,
                          const int* labels);

double accuracy(const Network& net, const Dataset& ds,
                const std::vector<std::vector<double>>& masks = {});

// Differentiable forward. mask_nodes[l] = tape node or -1.
struct ForwardGraph {
  int logits = -1;
  std::vector<int> w_nodes;
  std::vector<int> b_nodes;
};
ForwardGraph forward_graph(ad::Tape& tape, const Network& net, int x_node,
                           const std::vector<int>& mask_nodes);

// Deterministic toy data; kinds: two-gaussians, concentric-rings, xor-grid.
Dataset make_toy_dataset(const std::string& kind, int n_samples, std::uint64_t seed);

// CSV with header "x0,...,x{d-1},label"; label is an integer class id.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

// Leading (1 - eval_fraction) rows train, the rest eval.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double eval_fraction);

ad::Tensor batch_tensor(const Dataset& ds, const std::vector<int>& idx);
std::vector<int> batch_labels(const Dataset& ds, const std::vector<int>& idx);

}  // namespace otp::nn
