#include "otprune/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "otprune/kernels.hpp"

namespace otp::nn {

long Network::param_count() const {
  long acc = 0;
  for (const auto& l : layers) acc += static_cast<long>(l.in) * l.out + l.out;
  return acc;
}

Network make_network(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
  Network net;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer l;
    l.in = sizes[i];
    l.out = sizes[i + 1];
    if (l.in < 0 || l.out < 1) throw std::invalid_argument("invalid layer size");
    l.w.resize(static_cast<std::size_t>(l.in) * l.out);
    l.b.assign(l.out, 0.0);
    const double std_dev = l.in > 0 ? std::sqrt(2.0 / l.in) : 0.0;
    for (auto& w : l.w) w = std_dev * rng.normal();
    net.layers.push_back(std::move(l));
  }
  return net;
}

void assign_mask_sites(Network& net, MaskKind kind, bool mask_first_layer) {
  const int L = static_cast<int>(net.layers.size());
  for (int i = 0; i < L; ++i) {
    auto& layer = net.layers[i];
    layer.site = MaskKind::kNone;
    layer.scores.clear();
    if (kind == MaskKind::kPerWeight) {
      layer.site = MaskKind::kPerWeight;
    } else if (kind == MaskKind::kPerUnit) {
      const bool is_first = i == 0;
      const bool is_last = i == L - 1;
      if (!is_last && (mask_first_layer || !is_first)) {
        layer.site = MaskKind::kPerUnit;
        layer.scores = init_scores_structured(layer);
      }
    }
  }
}

std::vector<int> mask_site_layers(const Network& net) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i)
    if (net.layers[i].site != MaskKind::kNone) out.push_back(i);
  return out;
}

std::vector<double> init_scores_structured(const DenseLayer& layer) {
  std::vector<double> s(layer.out);
  for (int j = 0; j < layer.out; ++j) {
    double acc = 0.0;
    for (int i = 0; i < layer.in; ++i) {
      const double w = layer.w[static_cast<std::size_t>(j) * layer.in + i];
      acc += w * w;
    }
    s[j] = std::sqrt(acc);
  }
  return s;
}

std::vector<double> scores_unstructured(const DenseLayer& layer) {
  std::vector<double> s(layer.w.size());
  for (std::size_t i = 0; i < layer.w.size(); ++i) s[i] = std::fabs(layer.w[i]);
  return s;
}

std::vector<double> forward_masked(const Network& net, const double* x, int batch,
                                   const std::vector<std::vector<double>>& masks) {
  if (!masks.empty() && masks.size() != net.layers.size())
    throw std::invalid_argument("forward_masked: mask count != layer count");
  std::vector<double> cur(x, x + static_cast<std::size_t>(batch) * net.input_dim());
  std::vector<double> nxt;
  std::vector<double> wbuf;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    const double* w = l.w.data();
    if (!masks.empty() && !masks[li].empty() && l.site == MaskKind::kPerWeight) {
      if (masks[li].size() != l.w.size())
        throw std::invalid_argument("forward_masked: per-weight mask length mismatch");
      wbuf.resize(l.w.size());
      for (std::size_t i = 0; i < l.w.size(); ++i) wbuf[i] = l.w[i] * masks[li][i];
      w = wbuf.data();
    }
    nxt.assign(static_cast<std::size_t>(batch) * l.out, 0.0);
    kern::mm_nt(cur.data(), w, nxt.data(), batch, l.in, l.out);
    for (int r = 0; r < batch; ++r)
      for (int j = 0; j < l.out; ++j) nxt[static_cast<std::size_t>(r) * l.out + j] += l.b[j];
    if (!masks.empty() && !masks[li].empty() && l.site == MaskKind::kPerUnit) {
      if (static_cast<int>(masks[li].size()) != l.out)
        throw std::invalid_argument("forward_masked: per-unit mask length mismatch");
      for (int r = 0; r < batch; ++r)
        for (int j = 0; j < l.out; ++j) nxt[static_cast<std::size_t>(r) * l.out + j] *= masks[li][j];
    }
    if (li + 1 < net.layers.size()) {
      for (auto& v : nxt) v = v > 0.0 ? v : 0.0;
    }
    cur.swap(nxt);
  }
  return cur;
}

std::vector<double> forward(const Network& net, const double* x, int batch) {
  return forward_masked(net, x, batch, {});
}

double cross_entropy_loss(const std::vector<double>& logits, int batch, int classes,
                          const int* labels) {
  double acc = 0.0;
  for (int i = 0; i < batch; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * classes;
    acc += kern::logsumexp(row, classes) - row[labels[i]];
  }
  return acc / batch;
}

double accuracy(const Network& net, const Dataset& ds,
                const std::vector<std::vector<double>>& masks) {
  const auto logits = forward_masked(net, ds.x.data(), ds.rows, masks);
  int hits = 0;
  for (int i = 0; i < ds.rows; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * ds.n_classes;
    int best = 0;
    for (int j = 1; j < ds.n_classes; ++j)
      if (row[j] > row[best]) best = j;
    hits += best == ds.y[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / ds.rows;
}

ForwardGraph forward_graph(ad::Tape& tape, const Network& net, int x_node,
                           const std::vector<int>& mask_nodes) {
  if (mask_nodes.size() != net.layers.size())
    throw std::invalid_argument("forward_graph: mask node count != layer count");
  ForwardGraph fg;
  int h = x_node;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    ad::Tensor wt(l.out, l.in);
    wt.v = l.w;
    int w_node = tape.var(std::move(wt));
    const int b_node = tape.var(ad::Tensor::vector(l.b));
    fg.w_nodes.push_back(w_node);
    fg.b_nodes.push_back(b_node);

    int w_eff = w_node;
    if (mask_nodes[li] >= 0 && l.site == MaskKind::kPerWeight)
      w_eff = tape.mul(w_node, tape.reshape(mask_nodes[li], l.out, l.in));
    int z = tape.add_row(tape.matmul_nt(h, w_eff), b_node);
    if (mask_nodes[li] >= 0 && l.site == MaskKind::kPerUnit)
      z = tape.col_scale(z, mask_nodes[li]);
    h = li + 1 < net.layers.size() ? tape.relu(z) : z;
  }
  fg.logits = h;
  return fg;
}

Dataset make_toy_dataset(const std::string& kind, int n_samples, std::uint64_t seed) {
  if (n_samples < 4) throw std::invalid_argument("make_toy_dataset: n_samples must be >= 4");
  Rng rng(seed);
  Dataset ds;
  ds.n_features = 2;
  ds.n_classes = 2;
  ds.rows = n_samples;
  ds.x.resize(2 * static_cast<std::size_t>(n_samples));
  ds.y.resize(n_samples);

  for (int i = 0; i < n_samples; ++i) {
    const int label = i % 2;
    double px = 0.0, py = 0.0;
    if (kind == "two-gaussians") {
      const double cx = label == 0 ? -1.2 : 1.2;
      px = cx + 0.6 * rng.normal();
      py = 0.6 * rng.normal();
    } else if (kind == "concentric-rings") {
      const double radius = (label == 0 ? 1.0 : 2.0) + 0.25 * rng.normal();
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      px = radius * std::cos(theta);
      py = radius * std::sin(theta);
    } else if (kind == "xor-grid") {
      do {
        px = rng.uniform(-1.0, 1.0);
        py = rng.uniform(-1.0, 1.0);
      } while (std::fabs(px) < 0.08 || std::fabs(py) < 0.08);
      // Resample until the quadrant parity matches the target label.
      if (((px > 0.0) != (py > 0.0) ? 1 : 0) != label) px = -px;
    } else {
      throw std::invalid_argument("make_toy_dataset: unknown kind '" + kind + "'");
    }
    ds.x[2 * static_cast<std::size_t>(i)] = px;
    ds.x[2 * static_cast<std::size_t>(i) + 1] = py;
    ds.y[i] = label;
  }

  // Shuffle rows so contiguous train/eval splits stay class-balanced.
  std::vector<int> order(n_samples);
  for (int i = 0; i < n_samples; ++i) order[i] = i;
  rng.shuffle(order);
  Dataset out = ds;
  for (int i = 0; i < n_samples; ++i) {
    out.x[2 * static_cast<std::size_t>(i)] = ds.x[2 * static_cast<std::size_t>(order[i])];
    out.x[2 * static_cast<std::size_t>(i) + 1] = ds.x[2 * static_cast<std::size_t>(order[i]) + 1];
    out.y[i] = ds.y[order[i]];
  }
  return out;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (int j = 0; j < ds.n_features; ++j) f << "x" << j << ",";
  f << "label\n";
  char buf[40];
  for (int i = 0; i < ds.rows; ++i) {
    for (int j = 0; j < ds.n_features; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x[static_cast<std::size_t>(i) * ds.n_features + j]);
      f << buf << ",";
    }
    f << ds.y[i] << "\n";
  }
  if (!f) throw DataError("write failed: " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty dataset file: " + path);
  // Header: feature names then "label".
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
  }
  if (cols.size() < 2 || cols.back() != "label")
    throw DataError("dataset header must end with 'label': " + path);
  Dataset ds;
  ds.n_features = static_cast<int>(cols.size()) - 1;
  int max_label = 0;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cells;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (static_cast<int>(cells.size()) != ds.n_features + 1)
      throw DataError("row " + std::to_string(lineno) + " has wrong column count: " + path);
    try {
      for (int j = 0; j < ds.n_features; ++j) ds.x.push_back(std::stod(cells[j]));
      const int label = std::stoi(cells.back());
      if (label < 0) throw DataError("negative label");
      ds.y.push_back(label);
      max_label = std::max(max_label, label);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("row " + std::to_string(lineno) + " is not numeric: " + path);
    }
  }
  ds.rows = static_cast<int>(ds.y.size());
  if (ds.rows == 0) throw DataError("dataset has no rows: " + path);
  ds.n_classes = max_label + 1;
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double eval_fraction) {
  if (eval_fraction < 0.0 || eval_fraction >= 1.0)
    throw std::invalid_argument("eval_fraction must be in [0, 1)");
  const int eval_rows = static_cast<int>(std::lround(eval_fraction * ds.rows));
  const int train_rows = ds.rows - eval_rows;
  Dataset train, eval;
  train.n_features = eval.n_features = ds.n_features;
  train.n_classes = eval.n_classes = ds.n_classes;
  train.rows = train_rows;
  eval.rows = eval_rows;
  train.x.assign(ds.x.begin(), ds.x.begin() + static_cast<std::size_t>(train_rows) * ds.n_features);
  train.y.assign(ds.y.begin(), ds.y.begin() + train_rows);
  eval.x.assign(ds.x.begin() + static_cast<std::size_t>(train_rows) * ds.n_features, ds.x.end());
  eval.y.assign(ds.y.begin() + train_rows, ds.y.end());
  return {std::move(train), std::move(eval)};
}

ad::Tensor batch_tensor(const Dataset& ds, const std::vector<int>& idx) {
  ad::Tensor t(static_cast<int>(idx.size()), ds.n_features);
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (int j = 0; j < ds.n_features; ++j)
      t.at(static_cast<int>(r), j) = ds.x[static_cast<std::size_t>(idx[r]) * ds.n_features + j];
  return t;
}

std::vector<int> batch_labels(const Dataset& ds, const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = ds.y[idx[r]];
  return out;
}

}  // namespace otp::nn
