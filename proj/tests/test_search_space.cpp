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


#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "evoquant/search_space.hpp"

namespace evoquant {
namespace {

SpaceConfig b1_config() {
  SpaceConfig c;
  c.combinations = 1;
  c.profile = StackingProfile::custom("NR", 8);
  c.bit_choices = {4, 8};
  return c;
}

// Every B=1 cell: inputs in {-2,-1}, ops from the six kinds.
std::vector<CellGenome> enumerate_b1_cells(const std::vector<OpKind>& ops) {
  std::vector<CellGenome> out;
  for (int i1 : {-2, -1})
    for (int i2 : {-2, -1})
      for (auto o1 : ops)
        for (auto o2 : ops) out.push_back({{{i1, i2, o1, o2}}});
  return out;
}

int changed_fields(const ModelGenome& a, const ModelGenome& b) {
  int n = 0;
  auto cmp = [&](const CellGenome& x, const CellGenome& y) {
    for (std::size_t j = 0; j < x.combinations.size(); ++j) {
      const auto& p = x.combinations[j];
      const auto& q = y.combinations[j];
      n += (p.input_1 != q.input_1) + (p.input_2 != q.input_2) + (p.op_1 != q.op_1) +
           (p.op_2 != q.op_2);
    }
  };
  cmp(a.normal, b.normal);
  cmp(a.reduction, b.reduction);
  return n;
}

int policy_distance(const ModelGenome& a, const ModelGenome& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.policy.bits.size(); ++i) n += a.policy.bits[i] != b.policy.bits[i];
  return n;
}

TEST(Ops, NamesRoundTrip) {
  EXPECT_EQ(kAllOps.size(), 6u);
  std::set<std::string> names;
  for (auto op : kAllOps) {
    names.insert(std::string(op_name(op)));
    EXPECT_EQ(parse_op(op_name(op)), op);
  }
  EXPECT_EQ(names, (std::set<std::string>{"sep_conv_3", "sep_conv_5", "avg_pool_3", "max_pool_3",
                                          "zero", "identity"}));
  EXPECT_THROW(parse_op("conv_7"), FormatError);
}

TEST(Profile, CellCounts) {
  EXPECT_EQ(StackingProfile::cifar(6, 36).cell_count(), 20u);
  EXPECT_EQ(StackingProfile::cifar(1, 8).pattern_string(), "NRNRN");
  EXPECT_EQ(StackingProfile::imagenet(1, 8).pattern_string(), "RRNRNRN");
  EXPECT_EQ(StackingProfile::imagenet(4, 8).cell_count(), 16u);
  EXPECT_EQ(StackingProfile::custom("NRN", 4).cell_count(), 3u);
  EXPECT_THROW(StackingProfile::custom("NX", 4), InvalidArgument);
  EXPECT_THROW(StackingProfile::cifar(0, 4), InvalidArgument);
}

TEST(Profile, JsonRoundTrip) {
  for (const auto& p : {StackingProfile::cifar(2, 16), StackingProfile::imagenet(1, 8),
                        StackingProfile::custom("NRRN", 4)})
    EXPECT_EQ(profile_from_json(profile_to_json(p)), p);
  EXPECT_EQ(profile_to_json(StackingProfile::cifar(2, 16)),
            nlohmann::json::parse(R"({"n":2,"f_init":16,"dataset":"cifar-style"})"));
  EXPECT_THROW(profile_from_json(nlohmann::json::parse(R"({"n":1})")), FormatError);
}

TEST(RandomGenome, DeterministicAndValid) {
  SpaceConfig c;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const auto g = random_genome(c, a);
    EXPECT_EQ(g, random_genome(c, b));
    EXPECT_TRUE(validate(g, c).empty());
    EXPECT_EQ(g.normal.combinations.size(), 5u);
    EXPECT_EQ(g.policy.bits.size(), 5u);
  }
}

TEST(RandomGenome, B1CellsUniform) {
  const SpaceConfig c = b1_config();
  const auto all = enumerate_b1_cells(c.ops);
  ASSERT_EQ(all.size(), 144u);
  std::map<std::string, int> counts;
  for (const auto& cell : all) counts[cell_to_json(cell).dump()] = 0;
  Rng rng(5);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto key = cell_to_json(random_cell(c, rng)).dump();
    ASSERT_TRUE(counts.contains(key)) << key;
    ++counts[key];
  }
  const double p = 1.0 / 144, expect = n * p, sigma = std::sqrt(n * p * (1 - p));
  for (const auto& [k, v] : counts) EXPECT_LT(std::fabs(v - expect), 5 * sigma) << k;
}

TEST(Validate, Diagnostics) {
  SpaceConfig c;
  c.profile = StackingProfile::cifar(6, 36);
  Rng rng(1);
  ModelGenome g = random_genome(c, rng);
  EXPECT_TRUE(validate(g, c).empty());

  ModelGenome fwd = g;
  fwd.normal.combinations[0].input_1 = 0;
  auto d = validate(fwd, c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NE(d[0].find("forward reference"), std::string::npos);

  ModelGenome pol = g;
  pol.policy.bits.resize(19, 8);
  d = validate(pol, c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], "policy length mismatch");

  ModelGenome many = g;
  many.reduction.combinations[2].input_2 = -3;
  many.policy.bits[0] = 2;
  many.normal.combinations.pop_back();
  d = validate(many, c);
  EXPECT_EQ(d.size(), 3u);

  SpaceConfig narrow = c;
  narrow.ops = {OpKind::kZero};
  EXPECT_FALSE(validate(g, narrow).empty());
  EXPECT_THROW(require_valid(fwd, c), InvalidArgument);
}

TEST(MutateArchitecture, ExactlyOneFieldChanges) {
  SpaceConfig c;
  Rng rng(2);
  const ModelGenome parent = random_genome(c, rng);
  for (int i = 0; i < 1000; ++i) {
    const auto child = mutate_architecture(parent, c, rng);
    EXPECT_NE(child, parent);
    EXPECT_EQ(changed_fields(parent, child), 1);
    EXPECT_EQ(child.policy, parent.policy);
    EXPECT_TRUE(validate(child, c).empty());
  }
}

TEST(MutateArchitecture, PositionZeroInputsStayExternal) {
  const SpaceConfig c = b1_config();
  Rng rng(3);
  ModelGenome g = random_genome(c, rng);
  for (int i = 0; i < 500; ++i) {
    g = mutate_architecture(g, c, rng);
    for (const auto* cell : {&g.normal, &g.reduction}) {
      EXPECT_TRUE(cell->combinations[0].input_1 == -2 || cell->combinations[0].input_1 == -1);
      EXPECT_TRUE(cell->combinations[0].input_2 == -2 || cell->combinations[0].input_2 == -1);
    }
  }
}

TEST(MutateArchitecture, SitesUniform) {
  SpaceConfig c;
  c.combinations = 2;
  Rng rng(4);
  const ModelGenome parent = random_genome(c, rng);
  std::map<std::tuple<int, int, int>, int> counts;
  const int n = 16000;
  for (int i = 0; i < n; ++i) {
    const auto child = mutate_architecture(parent, c, rng);
    for (int cell = 0; cell < 2; ++cell)
      for (int j = 0; j < 2; ++j) {
        const auto& p = (cell ? parent.reduction : parent.normal).combinations[j];
        const auto& q = (cell ? child.reduction : child.normal).combinations[j];
        if (p.input_1 != q.input_1) ++counts[{cell, j, 0}];
        if (p.input_2 != q.input_2) ++counts[{cell, j, 1}];
        if (p.op_1 != q.op_1) ++counts[{cell, j, 2}];
        if (p.op_2 != q.op_2) ++counts[{cell, j, 3}];
      }
  }
  ASSERT_EQ(counts.size(), 16u);
  const double p = 1.0 / 16, sigma = std::sqrt(n * p * (1 - p));
  for (const auto& [k, v] : counts) EXPECT_LT(std::fabs(v - n * p), 5 * sigma);
}

TEST(MutateArchitecture, NoAlternative) {
  SpaceConfig c = b1_config();
  c.ops = {OpKind::kIdentity};
  ModelGenome g{{{{-2, -1, OpKind::kIdentity, OpKind::kIdentity}}},
                {{{-2, -1, OpKind::kIdentity, OpKind::kIdentity}}},
                {{4, 8}}};
  // Inputs still have two choices each.
  Rng rng(6);
  EXPECT_NO_THROW(mutate_architecture(g, c, rng));
}

TEST(MutatePolicy, OneEntryChanges) {
  SpaceConfig c;
  c.profile = StackingProfile::custom("NNN", 4);
  ModelGenome g;
  Rng rng(7);
  g = random_genome(c, rng);
  g.policy.bits = {8, 8, 8};
  for (int i = 0; i < 200; ++i) {
    const auto child = mutate_policy(g, c, rng);
    EXPECT_EQ(policy_distance(g, child), 1);
    EXPECT_EQ(changed_fields(g, child), 0);
    for (int b : child.policy.bits) EXPECT_TRUE(b == 4 || b == 8 || b == 16);
  }
}

TEST(MutatePolicy, PositionsUniform) {
  SpaceConfig c;
  c.profile = StackingProfile::cifar(1, 4);
  Rng rng(8);
  const auto g = random_genome(c, rng);
  std::vector<int> counts(5, 0);
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto child = mutate_policy(g, c, rng);
    for (int k = 0; k < 5; ++k) counts[k] += child.policy.bits[k] != g.policy.bits[k];
  }
  const double p = 0.2, sigma = std::sqrt(n * p * (1 - p));
  for (int v : counts) EXPECT_LT(std::fabs(v - n * p), 5 * sigma);
}

TEST(MutatePolicy, SingleChoiceRejected) {
  SpaceConfig c;
  c.bit_choices = {8};
  Rng rng(9);
  const auto g = random_genome(c, rng);
  EXPECT_THROW(mutate_policy(g, c, rng), InvalidArgument);
}

TEST(Cardinality, TwentyCellThreeChoicePolicyFactor) {
  SpaceConfig c;
  c.profile = StackingProfile::cifar(6, 36);
  EXPECT_EQ(space_cardinality(c).policy, BigInt(3486784401ull));
}

TEST(Cardinality, B1MatchesEnumeration) {
  const SpaceConfig c = b1_config();
  const auto card = space_cardinality(c);
  EXPECT_EQ(card.per_cell, BigInt(enumerate_b1_cells(c.ops).size()));
  EXPECT_EQ(card.per_cell, 144);
  EXPECT_EQ(card.architecture, 20736);
  EXPECT_EQ(card.policy, 4);
  // Distinct genomes generated exhaustively.
  std::set<std::string> keys;
  for (const auto& n : enumerate_b1_cells(c.ops))
    for (const auto& r : enumerate_b1_cells(c.ops))
      for (int b0 : c.bit_choices)
        for (int b1 : c.bit_choices) {
          ModelGenome g{n, r, {{b0, b1}}};
          ASSERT_TRUE(validate(g, c).empty());
          keys.insert(genome_key(g));
        }
  EXPECT_EQ(BigInt(keys.size()), card.total);
}

TEST(Cardinality, DefaultSpace) {
  SpaceConfig c;
  c.profile = StackingProfile::cifar(6, 36);
  BigInt per = 1;
  for (int j = 0; j < 5; ++j) per *= (j + 2) * (j + 2) * 36;
  const auto card = space_cardinality(c);
  EXPECT_EQ(card.per_cell, per);
  EXPECT_EQ(card.total, per * per * BigInt(3486784401ull));
}

TEST(GenomeJson, SchemaAndRoundTrip) {
  ModelGenome g{{{{-2, -1, OpKind::kSepConv3, OpKind::kZero}}},
                {{{-1, -1, OpKind::kMaxPool3, OpKind::kIdentity}}},
                {{4, 16}}};
  const auto j = genome_to_json(g);
  EXPECT_EQ(j, nlohmann::json::parse(
                   R"({"normal":[[-2,-1,"sep_conv_3","zero"]],"reduction":[[-1,-1,"max_pool_3","identity"]],"policy":[4,16]})"));
  EXPECT_EQ(genome_from_json(j), g);
  EXPECT_EQ(genome_digest(g), genome_digest(genome_from_json(j)));
  EXPECT_THROW(genome_from_json(nlohmann::json::parse(R"({"normal":[[1,2]]})")), FormatError);
  EXPECT_THROW(genome_from_json(nlohmann::json::parse(
                   R"({"normal":[[-2,-1,"conv","zero"]],"reduction":[],"policy":[]})")),
               FormatError);
}

TEST(GenomeJson, ArchitectureKeyIgnoresPolicy) {
  SpaceConfig c;
  Rng rng(10);
  auto g = random_genome(c, rng);
  auto h = mutate_policy(g, c, rng);
  EXPECT_EQ(architecture_key(g), architecture_key(h));
  EXPECT_NE(genome_key(g), genome_key(h));
}

}  // namespace
}  // namespace evoquant
