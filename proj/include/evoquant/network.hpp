// Copyright 2026 The evoquant Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Assembly of a genome into a concrete layer graph, and a small dense
// trainer for that graph.
//
// Cell operations act on feature vectors instead of feature maps:
//
//   sep_conv_3  tanh(W x + b)
//   sep_conv_5  tanh(W2 tanh(W1 x + b1) + b2)
//   avg_pool_3  mean of coordinates {i-1, i, i+1} (edge-clamped)
//   max_pool_3  max of the same window
//   identity    x
//   zero        0
//
// A combination adds its two operation outputs. A cell concatenates all of
// its combination outputs and projects them back to the cell's output width
// with tanh(P [c_0; ...; c_{B-1}] + p). Normal cells keep the width, reduction
// cells double it. The stem (tanh affine, width F) and the linear classifier
// carry no cell index.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evoquant/dataset.hpp"
#include "evoquant/error.hpp"
#include "evoquant/random.hpp"
#include "evoquant/search_space.hpp"
#include "evoquant/tensor_model.hpp"

namespace evoquant {

enum class NodeKind : std::uint8_t { kInput, kAffine, kAvgPool, kMaxPool, kZero, kAdd, kConcat };

struct TensorSpec {
  std::string name;
  Shape shape;  // {out, in} for weights, {out} for biases
  std::optional<std::uint16_t> cell_index;
  std::string share_key;  // non-empty for cell-operation tensors
  bool operator==(const TensorSpec&) const = default;
};

struct PlanNode {
  NodeKind kind = NodeKind::kInput;
  std::vector<int> inputs;
  int width = 0;
  int weight = -1;  // tensor indices, affine nodes only
  int bias = -1;
  bool tanh = false;
  bool operator==(const PlanNode&) const = default;
};

struct PlannedCell {
  CellRole role = CellRole::kNormal;
  int in_width = 0;
  int out_width = 0;
  int bits = 0;
  bool operator==(const PlannedCell&) const = default;
};

// Nodes are stored in topological order; node 0 is the input.
struct NetworkPlan {
  int input_width = 0;
  int classes = 0;
  std::vector<TensorSpec> tensors;
  std::vector<PlanNode> nodes;
  std::vector<PlannedCell> cells;
  int output = -1;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += shape_product(t.shape);
    return n;
  }
  bool operator==(const NetworkPlan&) const = default;
};

namespace detail {

class PlanBuilder {
 public:
  explicit PlanBuilder(NetworkPlan& plan) : plan_(plan) {}

  int input(int width) { return push({NodeKind::kInput, {}, width}); }

  int affine(int src, int out, const std::string& name, std::optional<std::uint16_t> cell,
             bool tanh, const std::string& share_key = {}) {
    const int in = plan_.nodes[src].width;
    const int w = tensor(name + ".weight", {static_cast<std::uint32_t>(out),
                                            static_cast<std::uint32_t>(in)},
                         cell, share_key.empty() ? "" : share_key + ".weight");
    const int b = tensor(name + ".bias", {static_cast<std::uint32_t>(out)}, cell,
                         share_key.empty() ? "" : share_key + ".bias");
    PlanNode node{NodeKind::kAffine, {src}, out, w, b, tanh};
    return push(std::move(node));
  }

  int unary(NodeKind kind, int src) { return push({kind, {src}, plan_.nodes[src].width}); }
  int zero(int width) { return push({NodeKind::kZero, {}, width}); }
  int add(int a, int b) { return push({NodeKind::kAdd, {a, b}, plan_.nodes[a].width}); }
  int concat(std::vector<int> srcs) {
    int width = 0;
    for (int s : srcs) width += plan_.nodes[s].width;
    return push({NodeKind::kConcat, std::move(srcs), width});
  }
  int width(int node) const { return plan_.nodes[node].width; }

 private:
  int push(PlanNode node) {
    plan_.nodes.push_back(std::move(node));
    return static_cast<int>(plan_.nodes.size()) - 1;
  }
  int tensor(std::string name, Shape shape, std::optional<std::uint16_t> cell,
             std::string share_key) {
    plan_.tensors.push_back({std::move(name), std::move(shape), cell, std::move(share_key)});
    return static_cast<int>(plan_.tensors.size()) - 1;
  }

  NetworkPlan& plan_;
};

inline int apply_op(PlanBuilder& b, OpKind op, int src, const std::string& name,
                    std::uint16_t cell, const std::string& share_key) {
  const int w = b.width(src);
  switch (op) {
    case OpKind::kSepConv3:
      return b.affine(src, w, name + ".sep_conv_3", cell, true, share_key + "/sep_conv_3");
    case OpKind::kSepConv5: {
      const int h = b.affine(src, w, name + ".sep_conv_5.0", cell, true,
                             share_key + "/sep_conv_5.0");
      return b.affine(h, w, name + ".sep_conv_5.1", cell, true, share_key + "/sep_conv_5.1");
    }
    case OpKind::kAvgPool3: return b.unary(NodeKind::kAvgPool, src);
    case OpKind::kMaxPool3: return b.unary(NodeKind::kMaxPool, src);
    case OpKind::kZero: return b.zero(w);
    case OpKind::kIdentity: return src;
  }
  return src;
}

}  // namespace detail

// Expands (genome, profile) into a layer graph for `input_width` features and
// `classes` outputs. Cell c reads the outputs of cells c-1 (input -1) and c-2
// (input -2); the stem output stands in for missing predecessors, and a
// width-mismatched c-2 input goes through a linear "prep" projection owned
// by cell c.
inline NetworkPlan assemble(const ModelGenome& genome, const StackingProfile& profile,
                            int input_width, int classes) {
  require(input_width >= 1 && classes >= 2, "bad network input/output width");
  require(profile.cell_count() >= 1 && profile.f_init >= 1, "bad stacking profile");
  if (genome.policy.bits.size() != profile.cell_count())
    throw InvalidArgument("policy length mismatch");
  for (const CellGenome* cell : {&genome.normal, &genome.reduction}) {
    require(!cell->combinations.empty(), "empty cell");
    for (std::size_t j = 0; j < cell->combinations.size(); ++j) {
      const auto& c = cell->combinations[j];
      for (int in : {c.input_1, c.input_2})
        require(in >= -2 && in < static_cast<int>(j), "forward reference in cell genome");
    }
  }

  NetworkPlan plan;
  plan.input_width = input_width;
  plan.classes = classes;
  detail::PlanBuilder b(plan);
  const int input = b.input(input_width);
  const int stem = b.affine(input, profile.f_init, "stem", std::nullopt, true);
  int prev2 = stem;
  int prev1 = stem;
  for (std::size_t c = 0; c < profile.cell_count(); ++c) {
    const auto cell_index = static_cast<std::uint16_t>(c);
    const CellRole role = profile.pattern[c];
    const CellGenome& genes = role == CellRole::kNormal ? genome.normal : genome.reduction;
    const std::string cname = "cell" + std::to_string(c);
    const int width = b.width(prev1);
    int in2 = prev2;
    if (b.width(prev2) != width) in2 = b.affine(prev2, width, cname + ".prep", cell_index, false);
    std::vector<int> states{in2, prev1};
    std::vector<int> outputs;
    for (std::size_t j = 0; j < genes.combinations.size(); ++j) {
      const auto& comb = genes.combinations[j];
      const std::string jname = cname + ".comb" + std::to_string(j);
      const std::string key = "c" + std::to_string(c) + "/j" + std::to_string(j);
      const int a = detail::apply_op(b, comb.op_1, states[comb.input_1 + 2], jname + ".in1",
                                     cell_index, key + "/s1");
      const int d = detail::apply_op(b, comb.op_2, states[comb.input_2 + 2], jname + ".in2",
                                     cell_index, key + "/s2");
      const int sum = b.add(a, d);
      states.push_back(sum);
      outputs.push_back(sum);
    }
    const int out_width = role == CellRole::kReduction ? 2 * width : width;
    const int joined = outputs.size() == 1 ? outputs.front() : b.concat(outputs);
    const int proj = b.affine(joined, out_width, cname + ".proj", cell_index, true);
    plan.cells.push_back({role, width, out_width, genome.policy.bits[c]});
    prev2 = prev1;
    prev1 = proj;
  }
  plan.output = b.affine(prev1, classes, "classifier", std::nullopt, false);
  return plan;
}

// ---------------------------------------------------------------------------
// Parameters and execution

using Matrix = Eigen::MatrixXf;  // column-major; activations are width x batch

// One matrix per plan tensor: weights out x in, biases out x 1.
struct Parameters {
  std::vector<Matrix> values;
  bool operator==(const Parameters& other) const {
    if (values.size() != other.values.size()) return false;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i].rows() != other.values[i].rows() ||
          values[i].cols() != other.values[i].cols() || values[i] != other.values[i])
        return false;
    return true;
  }
};

inline Matrix zeros_for(const TensorSpec& spec) {
  const int rows = static_cast<int>(spec.shape[0]);
  const int cols = spec.shape.size() > 1 ? static_cast<int>(spec.shape[1]) : 1;
  return Matrix::Zero(rows, cols);
}

// Returns a pre-trained starting value for a tensor, or nullopt.
using WarmStart = std::function<std::optional<Matrix>(const TensorSpec&)>;

// Xavier-uniform weights, zero biases; draws in tensor order.
inline Parameters init_parameters(const NetworkPlan& plan, std::uint64_t seed,
                                  const WarmStart& warm = {}) {
  Rng rng(seed);
  Parameters p;
  for (const auto& spec : plan.tensors) {
    Matrix m = zeros_for(spec);
    if (spec.shape.size() == 2) {
      const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = static_cast<float>(rng.uniform(-a, a));
    }
    if (warm) {
      if (auto v = warm(spec); v && v->rows() == m.rows() && v->cols() == m.cols()) m = *v;
    }
    p.values.push_back(std::move(m));
  }
  return p;
}

inline FloatModel to_float_model(const NetworkPlan& plan, const Parameters& params) {
  FloatModel model;
  model.float_width_bits = 32;
  for (std::size_t i = 0; i < plan.tensors.size(); ++i) {
    const auto& spec = plan.tensors[i];
    const Matrix& m = params.values[i];
    WeightTensor t{spec.name, spec.shape, {}, spec.cell_index};
    t.values.reserve(static_cast<std::size_t>(m.size()));
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) t.values.push_back(m(r, c));
    model.tensors.push_back(std::move(t));
  }
  return model;
}

// Looks tensors up by name; shapes must match the plan.
inline Parameters from_float_model(const NetworkPlan& plan, const FloatModel& model) {
  Parameters p;
  for (const auto& spec : plan.tensors) {
    const WeightTensor* t = model.find(spec.name);
    if (t == nullptr) throw InvalidArgument("model lacks tensor " + spec.name);
    if (t->shape != spec.shape) throw InvalidArgument("shape mismatch for tensor " + spec.name);
    Matrix m = zeros_for(spec);
    std::size_t k = 0;
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = static_cast<float>(t->values[k++]);
    p.values.push_back(std::move(m));
  }
  return p;
}

namespace detail {

inline void pool_forward(const Matrix& x, Matrix& y, bool max_pool) {
  const int n = static_cast<int>(x.rows());
  y.resize(x.rows(), x.cols());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(i - 1, 0);
    const int hi = std::min(i + 1, n - 1);
    if (max_pool) {
      y.row(i) = x.row(lo).cwiseMax(x.row(i)).cwiseMax(x.row(hi));
    } else {
      y.row(i) = (x.row(lo) + x.row(i) + x.row(hi)) / 3.0f;
    }
  }
}

inline void pool_backward(const Matrix& x, const Matrix& dy, Matrix& dx, bool max_pool) {
  const int n = static_cast<int>(x.rows());
  for (int i = 0; i < n; ++i) {
    const int window[3] = {std::max(i - 1, 0), i, std::min(i + 1, n - 1)};
    if (max_pool) {
      for (int col = 0; col < x.cols(); ++col) {
        int arg = window[0];
        for (int w : window)
          if (x(w, col) > x(arg, col)) arg = w;
        dx(arg, col) += dy(i, col);
      }
    } else {
      for (int w : window) dx.row(w) += dy.row(i) / 3.0f;
    }
  }
}

}  // namespace detail

// Forward pass over a batch (input_width x batch). Returns all node values;
// the last entry of interest is acts[plan.output] (logits).
inline std::vector<Matrix> forward(const NetworkPlan& plan, const Parameters& params,
                                   const Matrix& batch) {
  std::vector<Matrix> acts(plan.nodes.size());
  const Eigen::Index cols = batch.cols();
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const PlanNode& node = plan.nodes[i];
    Matrix& y = acts[i];
    switch (node.kind) {
      case NodeKind::kInput:
        y = batch;
        break;
      case NodeKind::kAffine:
        y = params.values[node.weight] * acts[node.inputs[0]];
        y.colwise() += params.values[node.bias].col(0);
        if (node.tanh) y = y.array().tanh().matrix();
        break;
      case NodeKind::kAvgPool:
      case NodeKind::kMaxPool:
        detail::pool_forward(acts[node.inputs[0]], y, node.kind == NodeKind::kMaxPool);
        break;
      case NodeKind::kZero:
        y = Matrix::Zero(node.width, cols);
        break;
      case NodeKind::kAdd:
        y = acts[node.inputs[0]] + acts[node.inputs[1]];
        break;
      case NodeKind::kConcat: {
        y.resize(node.width, cols);
        int row = 0;
        for (int src : node.inputs) {
          y.middleRows(row, acts[src].rows()) = acts[src];
          row += static_cast<int>(acts[src].rows());
        }
        break;
      }
    }
  }
  return acts;
}

// Mean softmax cross-entropy of `logits` (classes x batch); optionally
// writes d(loss)/d(logits).
inline double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                                    Matrix* grad) {
  const Eigen::Index batch = logits.cols();
  double loss = 0.0;
  if (grad) grad->resize(logits.rows(), batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const float peak = logits.col(c).maxCoeff();
    Eigen::VectorXf e = (logits.col(c).array() - peak).exp().matrix();
    const float z = e.sum();
    loss += std::log(static_cast<double>(z)) - (logits(labels[c], c) - peak);
    if (grad) {
      grad->col(c) = e / z;
      (*grad)(labels[c], c) -= 1.0f;
    }
  }
  if (grad) *grad /= static_cast<float>(batch);
  return loss / static_cast<double>(batch);
}

// Backpropagates d(loss)/d(logits) and returns one gradient per tensor.
inline std::vector<Matrix> backward(const NetworkPlan& plan, const Parameters& params,
                                    const std::vector<Matrix>& acts, const Matrix& dlogits) {
  std::vector<Matrix> grads(plan.tensors.size());
  for (std::size_t t = 0; t < plan.tensors.size(); ++t)
    grads[t] = Matrix::Zero(params.values[t].rows(), params.values[t].cols());
  std::vector<Matrix> delta(plan.nodes.size());
  std::vector<bool> live(plan.nodes.size(), false);
  auto accumulate = [&](int node, const Matrix& g) {
    if (!live[node]) {
      delta[node] = g;
      live[node] = true;
    } else {
      delta[node] += g;
    }
  };
  accumulate(plan.output, dlogits);
  for (int i = static_cast<int>(plan.nodes.size()) - 1; i >= 1; --i) {
    if (!live[i]) continue;
    const PlanNode& node = plan.nodes[i];
    Matrix& dy = delta[i];
    switch (node.kind) {
      case NodeKind::kAffine: {
        if (node.tanh) dy = (dy.array() * (1.0f - acts[i].array().square())).matrix();
        const Matrix& x = acts[node.inputs[0]];
        grads[node.weight].noalias() += dy * x.transpose();
        grads[node.bias].col(0) += dy.rowwise().sum();
        accumulate(node.inputs[0], params.values[node.weight].transpose() * dy);
        break;
      }
      case NodeKind::kAvgPool:
      case NodeKind::kMaxPool: {
        const Matrix& x = acts[node.inputs[0]];
        Matrix dx = Matrix::Zero(x.rows(), x.cols());
        detail::pool_backward(x, dy, dx, node.kind == NodeKind::kMaxPool);
        accumulate(node.inputs[0], dx);
        break;
      }
      case NodeKind::kAdd:
        accumulate(node.inputs[0], dy);
        accumulate(node.inputs[1], dy);
        break;
      case NodeKind::kConcat: {
        int row = 0;
        for (int src : node.inputs) {
          const auto h = acts[src].rows();
          accumulate(src, dy.middleRows(row, h));
          row += static_cast<int>(h);
        }
        break;
      }
      case NodeKind::kZero:
      case NodeKind::kInput:
        break;
    }
    dy.resize(0, 0);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Training

struct TrainHyper {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  bool operator==(const TrainHyper&) const = default;
};

struct TrainLog {
  double initial_loss = 0.0;          // training-set loss before any update
  std::vector<double> epoch_losses;   // mean mini-batch loss per epoch
};

inline Matrix gather_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Matrix x(data.dims, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const double* r = data.row(rows[c]);
    for (int k = 0; k < data.dims; ++k) x(k, static_cast<Eigen::Index>(c)) = static_cast<float>(r[k]);
  }
  return x;
}

inline std::vector<int> gather_labels(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(data.labels[r]);
  return out;
}

inline double mean_loss(const NetworkPlan& plan, const Parameters& params, const Dataset& data,
                        std::span<const std::size_t> rows) {
  const auto acts = forward(plan, params, gather_batch(data, rows));
  return softmax_cross_entropy(acts[plan.output], gather_labels(data, rows), nullptr);
}

// Mini-batch SGD with L2 weight decay on weight matrices. Deterministic for a
// given (plan, data, hyper). Throws EvaluationError if the loss diverges.
inline Parameters train_parameters(const NetworkPlan& plan, const Dataset& data,
                                   const TrainHyper& hyper, TrainLog* log = nullptr,
                                   const WarmStart& warm = {}) {
  require(plan.input_width == data.dims, "dimension mismatch: plan input vs dataset features");
  require(plan.classes == data.classes, "dimension mismatch: plan classes vs dataset classes");
  require(hyper.epochs >= 1 && hyper.batch_size >= 1 && hyper.learning_rate > 0.0 &&
              hyper.weight_decay >= 0.0,
          "bad training hyperparameters");
  require(!data.train.empty(), "empty training split");
  Parameters params = init_parameters(plan, derive_seed(hyper.seed, 1), warm);
  Rng order_rng(derive_seed(hyper.seed, 2));
  std::vector<std::size_t> order = data.train;
  if (log) log->initial_loss = mean_loss(plan, params, data, order);
  const float lr = static_cast<float>(hyper.learning_rate);
  const float decay = static_cast<float>(hyper.weight_decay);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t len = std::min<std::size_t>(hyper.batch_size, order.size() - start);
      std::span<const std::size_t> rows(order.data() + start, len);
      const auto acts = forward(plan, params, gather_batch(data, rows));
      Matrix dlogits;
      const double loss =
          softmax_cross_entropy(acts[plan.output], gather_labels(data, rows), &dlogits);
      if (!std::isfinite(loss)) throw EvaluationError("training diverged (loss is not finite)");
      epoch_loss += loss;
      ++batches;
      auto grads = backward(plan, params, acts, dlogits);
      for (std::size_t t = 0; t < grads.size(); ++t) {
        if (plan.tensors[t].shape.size() == 2) grads[t] += decay * params.values[t];
        params.values[t] -= lr * grads[t];
      }
    }
    if (log) log->epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  for (const auto& m : params.values)
    if (!m.allFinite()) throw EvaluationError("training diverged (non-finite weights)");
  return params;
}

// Trains the plan and returns its weights as a float-32 model tagged with
// cell indices from the plan.
inline FloatModel train(const NetworkPlan& plan, const Dataset& data, const TrainHyper& hyper,
                        TrainLog* log = nullptr, const WarmStart& warm = {}) {
  return to_float_model(plan, train_parameters(plan, data, hyper, log, warm));
}

// Fraction of `rows` whose argmax logit (lowest index on ties) equals the label.
inline double accuracy(const NetworkPlan& plan, const Parameters& params, const Dataset& data,
                       std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  const auto acts = forward(plan, params, gather_batch(data, rows));
  const Matrix& logits = acts[plan.output];
  std::size_t correct = 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < logits.rows(); ++r)
      if (logits(r, c) > logits(arg, c)) arg = r;
    if (static_cast<int>(arg) == data.labels[rows[static_cast<std::size_t>(c)]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

inline double validation_accuracy(const NetworkPlan& plan, const FloatModel& model,
                                  const Dataset& data) {
  return accuracy(plan, from_float_model(plan, model), data, data.validation);
}

}  // namespace evoquant
