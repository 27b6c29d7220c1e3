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

// Genome -> (accuracy, size) measurement.
//
// ToyEvaluator is the full train -> quantize -> test pipeline on a small
// dataset. QuantizeOnlyEvaluator keeps one pretrained model fixed and only
// applies policies to it. SurrogateEvaluator is a closed-form stand-in used
// where the whole search space must be enumerable.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "evoquant/dataset.hpp"
#include "evoquant/error.hpp"
#include "evoquant/network.hpp"
#include "evoquant/quantized_model.hpp"
#include "evoquant/random.hpp"
#include "evoquant/search_space.hpp"
#include "evoquant/tensor_model.hpp"

namespace evoquant {

struct EvalResult {
  double accuracy = 0.0;
  std::uint64_t size_bytes = 0;
  std::shared_ptr<const QuantizedModel> quantized_model;  // null for the surrogate
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvalResult evaluate(const ModelGenome& genome) = 0;
};

// Quantizes `model` cell by cell with `policy`, measures validation accuracy
// with the dequantized weights and the size of the JSQQ file.
inline EvalResult evaluate_quantized(const NetworkPlan& plan, const FloatModel& model,
                                     const QuantizationPolicy& policy, const Dataset& data,
                                     std::size_t bucket_size = kDefaultBucketSize,
                                     const Exemptions& exemptions = {}) {
  if (policy.bits.size() != model.cell_count()) throw InvalidArgument("policy length mismatch");
  auto qm = std::make_shared<QuantizedModel>(
      quantize_model(model, policy.bits, bucket_size, exemptions));
  EvalResult r;
  r.size_bytes = serialized_size(*qm);
  r.accuracy = validation_accuracy(plan, dequantize_model(*qm), data);
  r.quantized_model = std::move(qm);
  return r;
}

// Maps a policy onto a profile with a different cell count: target cell j
// takes the bit of source cell floor(j * source / target).
inline QuantizationPolicy remap_policy(const QuantizationPolicy& policy, std::size_t cells) {
  if (policy.bits.size() == cells) return policy;
  require(!policy.bits.empty(), "empty policy");
  QuantizationPolicy out;
  for (std::size_t j = 0; j < cells; ++j)
    out.bits.push_back(policy.bits[j * policy.bits.size() / cells]);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter sharing

// Weights shared across genomes. Operation tensors are keyed by
// (cell position, combination, input slot, op kind) and used to warm-start
// new architectures; fully trained models are cached per architecture so
// genomes differing only in policy reuse identical weights.
class SharedParameterStore {
 public:
  std::optional<Matrix> lookup(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = ops_.find(key);
    if (it == ops_.end()) return std::nullopt;
    return it->second;
  }

  void publish(const NetworkPlan& plan, const Parameters& params) {
    std::lock_guard lock(mu_);
    for (std::size_t t = 0; t < plan.tensors.size(); ++t)
      if (!plan.tensors[t].share_key.empty()) ops_[plan.tensors[t].share_key] = params.values[t];
  }

  std::optional<FloatModel> cached_model(const std::string& arch) const {
    std::lock_guard lock(mu_);
    auto it = models_.find(arch);
    if (it == models_.end()) return std::nullopt;
    ++hits_;
    return it->second;
  }

  void cache_model(const std::string& arch, const FloatModel& model) {
    std::lock_guard lock(mu_);
    models_.emplace(arch, model);
  }

  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Matrix> ops_;
  std::map<std::string, FloatModel> models_;
  mutable std::size_t hits_ = 0;
};

// ---------------------------------------------------------------------------
// Toy evaluator

struct ToyEvaluatorOptions {
  StackingProfile profile = StackingProfile::cifar(1, 8);
  TrainHyper hyper;
  std::size_t bucket_size = kDefaultBucketSize;
  Exemptions exemptions;
  bool share_parameters = false;
};

inline Metadata genome_metadata(const ModelGenome& g, const StackingProfile& profile) {
  return {{"genome", genome_to_json(g).dump()}, {"profile", profile_to_json(profile).dump()}};
}

class ToyEvaluator : public Evaluator {
 public:
  ToyEvaluator(Dataset data, ToyEvaluatorOptions options,
               std::shared_ptr<SharedParameterStore> store = nullptr)
      : data_(std::move(data)), options_(std::move(options)), store_(std::move(store)) {
    if (options_.share_parameters && !store_) store_ = std::make_shared<SharedParameterStore>();
  }

  // Trains the genome's architecture (or fetches it from the shared cache)
  // and returns the float model with genome/profile metadata.
  FloatModel train_genome(const ModelGenome& genome, const NetworkPlan& plan,
                          TrainLog* log = nullptr) {
    FloatModel model;
    if (options_.share_parameters) {
      const std::string arch = architecture_key(genome) + profile_to_json(options_.profile).dump();
      if (auto cached = store_->cached_model(arch)) {
        model = std::move(*cached);
      } else {
        WarmStart warm = [this](const TensorSpec& spec) -> std::optional<Matrix> {
          if (spec.share_key.empty()) return std::nullopt;
          return store_->lookup(spec.share_key);
        };
        Parameters params = train_parameters(plan, data_, options_.hyper, log, warm);
        store_->publish(plan, params);
        model = to_float_model(plan, params);
        store_->cache_model(arch, model);
      }
    } else {
      model = train(plan, data_, options_.hyper, log);
    }
    model.metadata = genome_metadata(genome, options_.profile);
    return model;
  }

  EvalResult evaluate(const ModelGenome& genome) override {
    const NetworkPlan plan = assemble(genome, options_.profile, data_.dims, data_.classes);
    const FloatModel model = train_genome(genome, plan);
    return evaluate_quantized(plan, model, genome.policy, data_, options_.bucket_size,
                              options_.exemptions);
  }

  const Dataset& data() const { return data_; }
  const ToyEvaluatorOptions& options() const { return options_; }
  const std::shared_ptr<SharedParameterStore>& store() const { return store_; }

 private:
  Dataset data_;
  ToyEvaluatorOptions options_;
  std::shared_ptr<SharedParameterStore> store_;
};

// ---------------------------------------------------------------------------
// Quantize-only evaluator (architecture frozen)

class QuantizeOnlyEvaluator : public Evaluator {
 public:
  QuantizeOnlyEvaluator(FloatModel model, NetworkPlan plan, Dataset data,
                        std::size_t bucket_size = kDefaultBucketSize, Exemptions exemptions = {})
      : model_(std::move(model)),
        plan_(std::move(plan)),
        data_(std::move(data)),
        bucket_size_(bucket_size),
        exemptions_(std::move(exemptions)) {
    if (model_.cell_count() == 0) throw InvalidArgument("model has no cell_index tags");
    const Bytes bytes = save_float_model(model_);
    digest_ = fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }

  // Only the policy of `genome` is used; results are memoized per
  // (model digest, policy).
  EvalResult evaluate(const ModelGenome& genome) override {
    const std::string key = std::to_string(digest_) + nlohmann::json(genome.policy.bits).dump();
    {
      std::lock_guard lock(mu_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    EvalResult r = evaluate_quantized(plan_, model_, genome.policy, data_, bucket_size_, exemptions_);
    std::lock_guard lock(mu_);
    memo_.emplace(key, r);
    return r;
  }

  const FloatModel& model() const { return model_; }
  const NetworkPlan& plan() const { return plan_; }
  std::size_t cell_count() const { return model_.cell_count(); }
  std::size_t memo_size() const {
    std::lock_guard lock(mu_);
    return memo_.size();
  }

 private:
  FloatModel model_;
  NetworkPlan plan_;
  Dataset data_;
  std::size_t bucket_size_;
  Exemptions exemptions_;
  std::uint64_t digest_ = 0;
  mutable std::mutex mu_;
  std::map<std::string, EvalResult> memo_;
};

// ---------------------------------------------------------------------------
// Surrogate evaluator
//
// accuracy = floor + (1 - floor) * matched / total, where matched sums
// input_weight for every combination input and op_weight for every
// combination operation equal to the planted genome's (both cells).
//
// size = base_bytes + unit_bytes * sum_c bits_c * (1 + units(cell c)),
// units(cell) = sum over its operations of {sep_conv_3: 1, sep_conv_5: 2,
// others: 0}; cell c uses the normal or reduction genome per profile.
//
// With target_bytes >= planted_max_size(spec), the planted architecture has
// fitness 1 under every policy and no other architecture reaches it.

struct SurrogateSpec {
  ModelGenome planted;
  StackingProfile profile = StackingProfile::custom("NR", 8);
  double input_weight = 1.0;
  double op_weight = 1.0;
  double accuracy_floor = 0.5;
  std::uint64_t base_bytes = 1000;
  std::uint64_t unit_bytes = 10;
};

inline int surrogate_op_units(OpKind op) {
  return op == OpKind::kSepConv3 ? 1 : op == OpKind::kSepConv5 ? 2 : 0;
}

inline double surrogate_accuracy(const ModelGenome& g, const SurrogateSpec& spec) {
  double matched = 0.0;
  double total = 0.0;
  auto score = [&](const CellGenome& cell, const CellGenome& target) {
    for (std::size_t j = 0; j < target.combinations.size(); ++j) {
      const auto& t = target.combinations[j];
      const Combination* c = j < cell.combinations.size() ? &cell.combinations[j] : nullptr;
      total += 2 * spec.input_weight + 2 * spec.op_weight;
      if (!c) continue;
      if (c->input_1 == t.input_1) matched += spec.input_weight;
      if (c->input_2 == t.input_2) matched += spec.input_weight;
      if (c->op_1 == t.op_1) matched += spec.op_weight;
      if (c->op_2 == t.op_2) matched += spec.op_weight;
    }
  };
  score(g.normal, spec.planted.normal);
  score(g.reduction, spec.planted.reduction);
  const double frac = total > 0.0 ? matched / total : 1.0;
  return spec.accuracy_floor + (1.0 - spec.accuracy_floor) * frac;
}

inline std::uint64_t surrogate_size(const ModelGenome& g, const SurrogateSpec& spec) {
  require(g.policy.bits.size() == spec.profile.cell_count(), "policy length mismatch");
  auto units = [](const CellGenome& cell) {
    std::uint64_t u = 1;
    for (const auto& c : cell.combinations)
      u += static_cast<std::uint64_t>(surrogate_op_units(c.op_1) + surrogate_op_units(c.op_2));
    return u;
  };
  const std::uint64_t normal = units(g.normal);
  const std::uint64_t reduction = units(g.reduction);
  std::uint64_t size = spec.base_bytes;
  for (std::size_t c = 0; c < spec.profile.cell_count(); ++c) {
    const std::uint64_t u = spec.profile.pattern[c] == CellRole::kNormal ? normal : reduction;
    size += spec.unit_bytes * static_cast<std::uint64_t>(g.policy.bits[c]) * u;
  }
  return size;
}

// Largest size the planted architecture reaches under any policy drawn from
// `bit_choices`.
inline std::uint64_t planted_max_size(const SurrogateSpec& spec,
                                      const std::vector<int>& bit_choices) {
  ModelGenome g = spec.planted;
  const int max_bits = *std::max_element(bit_choices.begin(), bit_choices.end());
  g.policy.bits.assign(spec.profile.cell_count(), max_bits);
  return surrogate_size(g, spec);
}

class SurrogateEvaluator : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateSpec spec) : spec_(std::move(spec)) {}

  EvalResult evaluate(const ModelGenome& genome) override {
    return {surrogate_accuracy(genome, spec_), surrogate_size(genome, spec_), nullptr};
  }

  const SurrogateSpec& spec() const { return spec_; }

 private:
  SurrogateSpec spec_;
};

}  // namespace evoquant
