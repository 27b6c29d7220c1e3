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

// Genome encoding for joint architecture + quantization-policy search.
//
// A model genome is a normal cell, a reduction cell and one bit width per
// cell of the assembled network. A cell is a list of combinations; the
// combination at position j reads two inputs from {-2, -1, 0, ..., j-1}
// (-2/-1 are the cell's external inputs, the rest are earlier combination
// outputs) and applies one operation to each.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "evoquant/error.hpp"
#include "evoquant/random.hpp"
#include "json.hpp"

namespace evoquant {

enum class OpKind : std::uint8_t { kSepConv3, kSepConv5, kAvgPool3, kMaxPool3, kZero, kIdentity };

inline constexpr std::array<OpKind, 6> kAllOps = {OpKind::kSepConv3, OpKind::kSepConv5,
                                                  OpKind::kAvgPool3, OpKind::kMaxPool3,
                                                  OpKind::kZero,     OpKind::kIdentity};

inline std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kSepConv3: return "sep_conv_3";
    case OpKind::kSepConv5: return "sep_conv_5";
    case OpKind::kAvgPool3: return "avg_pool_3";
    case OpKind::kMaxPool3: return "max_pool_3";
    case OpKind::kZero: return "zero";
    case OpKind::kIdentity: return "identity";
  }
  return "?";
}

inline OpKind parse_op(std::string_view name) {
  for (auto op : kAllOps)
    if (op_name(op) == name) return op;
  throw FormatError("unknown operation: " + std::string(name));
}

struct Combination {
  int input_1 = -2;
  int input_2 = -1;
  OpKind op_1 = OpKind::kIdentity;
  OpKind op_2 = OpKind::kIdentity;
  bool operator==(const Combination&) const = default;
};

struct CellGenome {
  std::vector<Combination> combinations;
  bool operator==(const CellGenome&) const = default;
};

struct QuantizationPolicy {
  std::vector<int> bits;  // one entry per cell of the assembled network
  bool operator==(const QuantizationPolicy&) const = default;
};

struct ModelGenome {
  CellGenome normal;
  CellGenome reduction;
  QuantizationPolicy policy;
  bool operator==(const ModelGenome&) const = default;
};

enum class CellRole : std::uint8_t { kNormal, kReduction };

// Macro-architecture: how cells are stacked and how wide the stem is.
struct StackingProfile {
  int n = 1;
  int f_init = 8;
  std::string dataset = "cifar-style";
  std::vector<CellRole> pattern;

  std::size_t cell_count() const { return pattern.size(); }
  bool operator==(const StackingProfile&) const = default;

  // N normal, reduction, N normal, reduction, N normal: 3N + 2 cells.
  static StackingProfile cifar(int n, int f_init) {
    require(n >= 1 && f_init >= 1, "profile needs n >= 1 and f_init >= 1");
    StackingProfile p{n, f_init, "cifar-style", {}};
    for (int stage = 0; stage < 3; ++stage) {
      if (stage > 0) p.pattern.push_back(CellRole::kReduction);
      for (int i = 0; i < n; ++i) p.pattern.push_back(CellRole::kNormal);
    }
    return p;
  }

  // Two extra reduction cells ahead of the CIFAR pattern: 3N + 4 cells.
  static StackingProfile imagenet(int n, int f_init) {
    StackingProfile p = cifar(n, f_init);
    p.dataset = "imagenet-style";
    p.pattern.insert(p.pattern.begin(), 2, CellRole::kReduction);
    return p;
  }

  // Explicit pattern string, 'N' = normal, 'R' = reduction.
  static StackingProfile custom(std::string_view pattern, int f_init) {
    require(!pattern.empty() && f_init >= 1, "custom profile needs a pattern and f_init >= 1");
    StackingProfile p{0, f_init, "custom", {}};
    for (char c : pattern) {
      if (c == 'N') {
        p.pattern.push_back(CellRole::kNormal);
      } else if (c == 'R') {
        p.pattern.push_back(CellRole::kReduction);
      } else {
        throw InvalidArgument("pattern characters must be N or R");
      }
    }
    return p;
  }

  std::string pattern_string() const {
    std::string s;
    for (auto r : pattern) s += r == CellRole::kNormal ? 'N' : 'R';
    return s;
  }
};

struct SpaceConfig {
  int combinations = 5;  // B
  std::vector<OpKind> ops{kAllOps.begin(), kAllOps.end()};
  std::vector<int> bit_choices{4, 8, 16};
  StackingProfile profile = StackingProfile::cifar(1, 8);

  std::size_t cell_count() const { return profile.cell_count(); }
};

// ---------------------------------------------------------------------------
// Sampling and validation

inline CellGenome random_cell(const SpaceConfig& config, Rng& rng) {
  CellGenome cell;
  for (int j = 0; j < config.combinations; ++j) {
    Combination c;
    c.input_1 = rng.index(static_cast<std::size_t>(j + 2)) - 2;
    c.input_2 = rng.index(static_cast<std::size_t>(j + 2)) - 2;
    c.op_1 = config.ops[rng.below(config.ops.size())];
    c.op_2 = config.ops[rng.below(config.ops.size())];
    cell.combinations.push_back(c);
  }
  return cell;
}

inline QuantizationPolicy random_policy(const SpaceConfig& config, Rng& rng) {
  QuantizationPolicy p;
  for (std::size_t i = 0; i < config.cell_count(); ++i)
    p.bits.push_back(config.bit_choices[rng.below(config.bit_choices.size())]);
  return p;
}

inline ModelGenome random_genome(const SpaceConfig& config, Rng& rng) {
  require(config.combinations >= 1 && !config.ops.empty() && !config.bit_choices.empty() &&
              config.cell_count() >= 1,
          "invalid space config");
  ModelGenome g;
  g.normal = random_cell(config, rng);
  g.reduction = random_cell(config, rng);
  g.policy = random_policy(config, rng);
  return g;
}

// Returns one diagnostic per violated invariant; empty means valid.
inline std::vector<std::string> validate(const ModelGenome& genome, const SpaceConfig& config) {
  std::vector<std::string> out;
  auto check_cell = [&](const CellGenome& cell, std::string_view which) {
    const std::string prefix = std::string(which) + " cell: ";
    if (cell.combinations.empty()) out.push_back(prefix + "empty cell");
    if (static_cast<int>(cell.combinations.size()) != config.combinations)
      out.push_back(prefix + "combination count mismatch");
    for (std::size_t j = 0; j < cell.combinations.size(); ++j) {
      const auto& c = cell.combinations[j];
      const std::string where = prefix + "combination " + std::to_string(j) + ": ";
      for (int in : {c.input_1, c.input_2}) {
        if (in < -2) out.push_back(where + "input index out of range");
        else if (in >= static_cast<int>(j)) out.push_back(where + "forward reference");
      }
      for (OpKind op : {c.op_1, c.op_2})
        if (std::find(config.ops.begin(), config.ops.end(), op) == config.ops.end())
          out.push_back(where + "operation not in search space");
    }
  };
  check_cell(genome.normal, "normal");
  check_cell(genome.reduction, "reduction");
  if (genome.policy.bits.size() != config.cell_count()) out.push_back("policy length mismatch");
  for (int b : genome.policy.bits)
    if (std::find(config.bit_choices.begin(), config.bit_choices.end(), b) ==
        config.bit_choices.end())
      out.push_back("bit choice not allowed: " + std::to_string(b));
  return out;
}

inline void require_valid(const ModelGenome& genome, const SpaceConfig& config) {
  const auto diags = validate(genome, config);
  if (!diags.empty()) throw InvalidArgument("invalid genome: " + diags.front());
}

// ---------------------------------------------------------------------------
// Mutation

namespace detail {

// Number of values a field can take: inputs at position j have j + 2 choices.
inline std::size_t field_choices(const SpaceConfig& config, int position, int field) {
  return field < 2 ? static_cast<std::size_t>(position + 2) : config.ops.size();
}

}  // namespace detail

// Replaces one of {input_1, input_2, op_1, op_2} of one combination of one
// cell with a different valid value. Cell, combination and field are drawn
// uniformly among those that admit an alternative.
inline ModelGenome mutate_architecture(const ModelGenome& genome, const SpaceConfig& config,
                                       Rng& rng) {
  struct Site {
    int cell;
    int position;
    int field;
  };
  std::vector<Site> sites;
  for (int cell = 0; cell < 2; ++cell) {
    const auto& combos = (cell == 0 ? genome.normal : genome.reduction).combinations;
    for (int j = 0; j < static_cast<int>(combos.size()); ++j)
      for (int f = 0; f < 4; ++f)
        if (detail::field_choices(config, j, f) >= 2) sites.push_back({cell, j, f});
  }
  if (sites.empty()) throw InvalidArgument("no alternative exists for any architecture field");
  const Site site = sites[rng.below(sites.size())];

  ModelGenome child = genome;
  Combination& c = (site.cell == 0 ? child.normal : child.reduction).combinations[site.position];
  if (site.field < 2) {
    int& input = site.field == 0 ? c.input_1 : c.input_2;
    // Uniform over {-2, ..., j-1} \ {input}.
    int pick = rng.index(static_cast<std::size_t>(site.position + 1)) - 2;
    if (pick >= input) ++pick;
    input = pick;
  } else {
    OpKind& op = site.field == 2 ? c.op_1 : c.op_2;
    std::vector<OpKind> others;
    for (auto o : config.ops)
      if (o != op) others.push_back(o);
    op = others[rng.below(others.size())];
  }
  return child;
}

// Resets one policy entry to a different bit choice.
inline ModelGenome mutate_policy(const ModelGenome& genome, const SpaceConfig& config, Rng& rng) {
  require(config.bit_choices.size() >= 2, "policy mutation needs at least two bit choices");
  require(!genome.policy.bits.empty(), "empty policy");
  ModelGenome child = genome;
  int& entry = child.policy.bits[rng.below(child.policy.bits.size())];
  std::vector<int> others;
  for (int b : config.bit_choices)
    if (b != entry) others.push_back(b);
  entry = others[rng.below(others.size())];
  return child;
}

// ---------------------------------------------------------------------------
// Cardinality

using BigInt = boost::multiprecision::cpp_int;

struct SpaceCardinality {
  BigInt per_cell;      // prod_j (j + 2)^2 |ops|^2
  BigInt architecture;  // per_cell^2 (normal x reduction)
  BigInt policy;        // |bit choices|^cells
  BigInt total;         // architecture x policy
};

inline SpaceCardinality space_cardinality(const SpaceConfig& config) {
  SpaceCardinality out;
  const BigInt ops = config.ops.size();
  out.per_cell = 1;
  for (int j = 0; j < config.combinations; ++j) out.per_cell *= BigInt(j + 2) * (j + 2) * ops * ops;
  out.architecture = out.per_cell * out.per_cell;
  out.policy = 1;
  for (std::size_t i = 0; i < config.cell_count(); ++i) out.policy *= config.bit_choices.size();
  out.total = out.architecture * out.policy;
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json cell_to_json(const CellGenome& cell) {
  auto arr = nlohmann::json::array();
  for (const auto& c : cell.combinations)
    arr.push_back({c.input_1, c.input_2, op_name(c.op_1), op_name(c.op_2)});
  return arr;
}

inline CellGenome cell_from_json(const nlohmann::json& j) {
  CellGenome cell;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 4) throw FormatError("combination must be [i1, i2, op1, op2]");
    cell.combinations.push_back({e[0].get<int>(), e[1].get<int>(),
                                 parse_op(e[2].get<std::string>()),
                                 parse_op(e[3].get<std::string>())});
  }
  return cell;
}

inline nlohmann::json genome_to_json(const ModelGenome& g) {
  return {{"normal", cell_to_json(g.normal)},
          {"reduction", cell_to_json(g.reduction)},
          {"policy", g.policy.bits}};
}

inline ModelGenome genome_from_json(const nlohmann::json& j) {
  try {
    ModelGenome g;
    g.normal = cell_from_json(j.at("normal"));
    g.reduction = cell_from_json(j.at("reduction"));
    g.policy.bits = j.at("policy").get<std::vector<int>>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad genome json: ") + e.what());
  }
}

inline nlohmann::json profile_to_json(const StackingProfile& p) {
  nlohmann::json j = {{"n", p.n}, {"f_init", p.f_init}, {"dataset", p.dataset}};
  if (p.dataset == "custom") j["pattern"] = p.pattern_string();
  return j;
}

inline StackingProfile profile_from_json(const nlohmann::json& j) {
  try {
    const std::string dataset = j.value("dataset", std::string("cifar-style"));
    const int f_init = j.at("f_init").get<int>();
    if (dataset == "cifar-style") return StackingProfile::cifar(j.at("n").get<int>(), f_init);
    if (dataset == "imagenet-style")
      return StackingProfile::imagenet(j.at("n").get<int>(), f_init);
    if (dataset == "custom")
      return StackingProfile::custom(j.at("pattern").get<std::string>(), f_init);
    throw FormatError("unknown profile dataset: " + dataset);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad profile json: ") + e.what());
  }
}

// Canonical compact text; identical genomes give identical digests.
inline std::string genome_key(const ModelGenome& g) { return genome_to_json(g).dump(); }

inline std::string architecture_key(const ModelGenome& g) {
  return nlohmann::json{{"normal", cell_to_json(g.normal)},
                        {"reduction", cell_to_json(g.reduction)}}
      .dump();
}

inline std::uint64_t genome_digest(const ModelGenome& g) { return fnv1a(genome_key(g)); }

}  // namespace evoquant
