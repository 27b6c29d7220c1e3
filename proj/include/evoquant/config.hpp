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

// JSON run configuration. Field names follow SearchConfig:
//
//   {
//     "population_size": 16, "sample_size": 16, "max_iterations": 100,
//     "target_bytes": 4000,            (or "target_mb": 0.004)
//     "mode": "joint" | "policy-only",
//     "seed": 1, "bucket_size": 256,
//     "space": {"combinations": 5, "ops": ["sep_conv_3", ...], "bit_choices": [4, 8, 16]},
//     "search_profile": {"n": 1, "f_init": 8, "dataset": "cifar-style"},
//     "evaluation_profile": {...},     (defaults to search_profile)
//     "seed_individuals": [genome, ...],
//     "evaluator": {
//       "kind": "toy",
//       "dataset": {"classes": 4, "dims": 16, "samples": 2000, "spread": 0.15, "seed": 7}
//                  (or {"csv": "path", "split_seed": 0}),
//       "train": {"epochs": 30, "batch_size": 64, "learning_rate": 0.05,
//                 "weight_decay": 1e-4, "seed": 1},
//       "share_parameters": false, "exempt_names": [], "exempt_cells": []
//     }
//     or {"kind": "surrogate", "planted": genome, "input_weight": 1, "op_weight": 1,
//         "accuracy_floor": 0.5, "base_bytes": 1000, "unit_bytes": 10},
//     "grid": [[8, 8], [16, 16]]       (sweep only)
//   }

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evoquant/dataset.hpp"
#include "evoquant/error.hpp"
#include "evoquant/evaluator.hpp"
#include "evoquant/evolution.hpp"
#include "evoquant/search_space.hpp"
#include "json.hpp"

namespace evoquant {

struct DatasetConfig {
  int classes = 4;
  int dims = 16;
  int samples = 2000;
  double spread = 0.15;
  std::uint64_t seed = 7;
  std::optional<std::string> csv;
  std::uint64_t split_seed = 0;

  Dataset load() const {
    return csv ? load_csv(*csv, split_seed) : make_blobs(classes, dims, samples, spread, seed);
  }
};

enum class EvaluatorKind { kToy, kSurrogate };

struct EvaluatorConfig {
  EvaluatorKind kind = EvaluatorKind::kToy;
  DatasetConfig dataset;
  TrainHyper hyper;
  bool share_parameters = false;
  Exemptions exemptions;
  SurrogateSpec surrogate;  // profile is overwritten with the search profile
  bool planted_given = false;
};

struct RunConfig {
  SearchConfig search;
  EvaluatorConfig evaluator;
  std::vector<SweepPair> grid;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw FormatError("unknown key in " + where + ": " + key);
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline SpaceConfig space_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"combinations", "ops", "bit_choices"}, "space");
  SpaceConfig s;
  read_opt(j, "combinations", s.combinations);
  if (j.contains("ops")) {
    s.ops.clear();
    for (const auto& op : j.at("ops")) s.ops.push_back(parse_op(op.get<std::string>()));
  }
  read_opt(j, "bit_choices", s.bit_choices);
  require(s.combinations >= 1, "space needs at least one combination");
  require(!s.ops.empty(), "space needs at least one operation");
  require(!s.bit_choices.empty(), "space needs at least one bit choice");
  for (int b : s.bit_choices)
    require(b >= 1 && b <= kMaxSerializableBits, "bit choice out of range: " + std::to_string(b));
  return s;
}

inline DatasetConfig dataset_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"classes", "dims", "samples", "spread", "seed", "csv", "split_seed"}, "dataset");
  DatasetConfig d;
  read_opt(j, "classes", d.classes);
  read_opt(j, "dims", d.dims);
  read_opt(j, "samples", d.samples);
  read_opt(j, "spread", d.spread);
  read_opt(j, "seed", d.seed);
  read_opt(j, "split_seed", d.split_seed);
  if (j.contains("csv")) d.csv = j.at("csv").get<std::string>();
  return d;
}

inline TrainHyper hyper_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"epochs", "batch_size", "learning_rate", "weight_decay", "seed"}, "train");
  TrainHyper h;
  read_opt(j, "epochs", h.epochs);
  read_opt(j, "batch_size", h.batch_size);
  read_opt(j, "learning_rate", h.learning_rate);
  read_opt(j, "weight_decay", h.weight_decay);
  read_opt(j, "seed", h.seed);
  require(h.epochs > 0 && h.batch_size > 0 && h.learning_rate > 0.0 && h.weight_decay >= 0.0,
          "train hyperparameters must be positive");
  return h;
}

inline EvaluatorConfig evaluator_from_json(const nlohmann::json& j) {
  EvaluatorConfig e;
  const std::string kind = j.value("kind", std::string("toy"));
  if (kind == "toy") {
    reject_unknown(j, {"kind", "dataset", "train", "share_parameters", "exempt_names", "exempt_cells"},
                   "evaluator");
    if (j.contains("dataset")) e.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("train")) e.hyper = hyper_from_json(j.at("train"));
    read_opt(j, "share_parameters", e.share_parameters);
    if (j.contains("exempt_names"))
      for (const auto& n : j.at("exempt_names")) e.exemptions.names.insert(n.get<std::string>());
    if (j.contains("exempt_cells"))
      for (const auto& c : j.at("exempt_cells")) e.exemptions.cells.insert(c.get<std::uint16_t>());
  } else if (kind == "surrogate") {
    reject_unknown(j, {"kind", "planted", "input_weight", "op_weight", "accuracy_floor", "base_bytes",
                       "unit_bytes"},
                   "evaluator");
    e.kind = EvaluatorKind::kSurrogate;
    auto& s = e.surrogate;
    if (j.contains("planted")) {
      s.planted = genome_from_json(j.at("planted"));
      e.planted_given = true;
    }
    read_opt(j, "input_weight", s.input_weight);
    read_opt(j, "op_weight", s.op_weight);
    read_opt(j, "accuracy_floor", s.accuracy_floor);
    read_opt(j, "base_bytes", s.base_bytes);
    read_opt(j, "unit_bytes", s.unit_bytes);
    require(s.accuracy_floor >= 0.0 && s.accuracy_floor <= 1.0, "accuracy_floor outside [0, 1]");
    require(s.input_weight >= 0.0 && s.op_weight >= 0.0, "surrogate weights must be non-negative");
    require(s.base_bytes > 0, "base_bytes must be positive");
  } else {
    throw FormatError("unknown evaluator kind: " + kind);
  }
  return e;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  try {
    detail::reject_unknown(j,
                           {"population_size", "sample_size", "max_iterations", "target_bytes",
                            "target_mb", "mode", "seed", "bucket_size", "space", "search_profile",
                            "evaluation_profile", "seed_individuals", "evaluator", "grid"},
                           "config");
    RunConfig rc;
    SearchConfig& c = rc.search;
    detail::read_opt(j, "population_size", c.population_size);
    detail::read_opt(j, "sample_size", c.sample_size);
    detail::read_opt(j, "max_iterations", c.max_iterations);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "bucket_size", c.bucket_size);
    if (j.contains("target_bytes") == j.contains("target_mb"))
      throw FormatError("exactly one of target_bytes and target_mb is required");
    if (j.contains("target_bytes")) {
      c.target_bytes = j.at("target_bytes").get<std::uint64_t>();
    } else {
      const double mb = j.at("target_mb").get<double>();
      require(mb > 0.0 && std::isfinite(mb), "target_mb must be positive");
      c.target_bytes = static_cast<std::uint64_t>(std::llround(mb * kBytesPerMB));
    }
    const std::string mode = j.value("mode", std::string("joint"));
    if (mode == "joint") {
      c.mode = SearchMode::kJoint;
    } else if (mode == "policy-only") {
      c.mode = SearchMode::kPolicyOnly;
    } else {
      throw FormatError("unknown mode: " + mode);
    }
    if (j.contains("space")) c.space = detail::space_from_json(j.at("space"));
    if (j.contains("search_profile")) c.space.profile = profile_from_json(j.at("search_profile"));
    c.evaluation_profile =
        j.contains("evaluation_profile") ? profile_from_json(j.at("evaluation_profile")) : c.space.profile;
    if (j.contains("seed_individuals"))
      for (const auto& g : j.at("seed_individuals")) c.seed_individuals.push_back(genome_from_json(g));
    require(c.bucket_size >= 2, "bucket_size must be >= 2");
    if (j.contains("evaluator")) rc.evaluator = detail::evaluator_from_json(j.at("evaluator"));
    if (j.contains("grid"))
      for (const auto& p : j.at("grid")) {
        if (!p.is_array() || p.size() != 2) throw FormatError("grid entries must be [P, S] pairs");
        rc.grid.push_back({p[0].get<int>(), p[1].get<int>()});
      }
    return rc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config: " + std::string(e.what()));
  }
  return parse_run_config(j);
}

// Surrogate spec for a search profile; an absent planted genome is drawn
// from the master seed.
inline SurrogateSpec resolve_surrogate(const RunConfig& rc) {
  SurrogateSpec spec = rc.evaluator.surrogate;
  spec.profile = rc.search.space.profile;
  if (!rc.evaluator.planted_given) {
    Rng rng(derive_seed(rc.search.seed, 0x91a7ull));
    spec.planted = random_genome(rc.search.space, rng);
  }
  require_valid(spec.planted, rc.search.space);
  return spec;
}

// Evaluator for search-time genomes (search profile). Toy evaluators share
// `data` when given so the dataset is generated once.
inline std::unique_ptr<Evaluator> make_evaluator(const RunConfig& rc,
                                                 const std::optional<Dataset>& data = std::nullopt,
                                                 const StackingProfile* profile = nullptr) {
  if (rc.evaluator.kind == EvaluatorKind::kSurrogate)
    return std::make_unique<SurrogateEvaluator>(resolve_surrogate(rc));
  ToyEvaluatorOptions opt;
  opt.profile = profile ? *profile : rc.search.space.profile;
  opt.hyper = rc.evaluator.hyper;
  opt.bucket_size = rc.search.bucket_size;
  opt.exemptions = rc.evaluator.exemptions;
  opt.share_parameters = rc.evaluator.share_parameters;
  return std::make_unique<ToyEvaluator>(data ? *data : rc.evaluator.dataset.load(), std::move(opt));
}

}  // namespace evoquant
