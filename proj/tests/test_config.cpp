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

#include <fstream>

#include "evoquant/config.hpp"
#include "test_util.hpp"

namespace evoquant {
namespace {

using nlohmann::json;

TEST(Config, MinimalDefaults) {
  const auto rc = parse_run_config(json{{"target_bytes", 4000}});
  EXPECT_EQ(rc.search.population_size, 16);
  EXPECT_EQ(rc.search.sample_size, 16);
  EXPECT_EQ(rc.search.max_iterations, 100);
  EXPECT_EQ(rc.search.target_bytes, 4000u);
  EXPECT_EQ(rc.search.mode, SearchMode::kJoint);
  EXPECT_EQ(rc.evaluator.kind, EvaluatorKind::kToy);
  EXPECT_EQ(rc.search.evaluation_profile, rc.search.space.profile);
  EXPECT_TRUE(rc.grid.empty());
}

TEST(Config, FullToy) {
  const json j = json::parse(R"({
    "population_size": 8, "sample_size": 4, "max_iterations": 20,
    "target_mb": 0.0045, "mode": "joint", "seed": 3, "bucket_size": 64,
    "space": {"combinations": 2, "ops": ["identity", "sep_conv_3"], "bit_choices": [2, 8]},
    "search_profile": {"n": 1, "f_init": 4, "dataset": "cifar-style"},
    "evaluation_profile": {"n": 2, "f_init": 8, "dataset": "cifar-style"},
    "evaluator": {"kind": "toy",
                  "dataset": {"classes": 3, "dims": 8, "samples": 300, "spread": 0.2, "seed": 1},
                  "train": {"epochs": 2, "batch_size": 16, "learning_rate": 0.1,
                            "weight_decay": 0, "seed": 9},
                  "share_parameters": true, "exempt_names": ["stem.weight"], "exempt_cells": [0]},
    "grid": [[8, 4], [8, 8]]
  })");
  const auto rc = parse_run_config(j);
  EXPECT_EQ(rc.search.target_bytes, 4500u);
  EXPECT_EQ(rc.search.bucket_size, 64u);
  EXPECT_EQ(rc.search.space.combinations, 2);
  EXPECT_EQ(rc.search.space.ops, (std::vector<OpKind>{OpKind::kIdentity, OpKind::kSepConv3}));
  EXPECT_EQ(rc.search.space.bit_choices, (std::vector<int>{2, 8}));
  EXPECT_EQ(rc.search.space.profile, StackingProfile::cifar(1, 4));
  EXPECT_EQ(rc.search.evaluation_profile, StackingProfile::cifar(2, 8));
  EXPECT_EQ(rc.evaluator.dataset.classes, 3);
  EXPECT_EQ(rc.evaluator.hyper.epochs, 2);
  EXPECT_EQ(rc.evaluator.hyper.seed, 9u);
  EXPECT_TRUE(rc.evaluator.share_parameters);
  EXPECT_TRUE(rc.evaluator.exemptions.names.contains("stem.weight"));
  EXPECT_TRUE(rc.evaluator.exemptions.cells.contains(0));
  ASSERT_EQ(rc.grid.size(), 2u);
  EXPECT_EQ(rc.grid[1].sample_size, 8);

  auto ev = make_evaluator(rc);
  Rng rng(1);
  const auto r = ev->evaluate(random_genome(rc.search.space, rng));
  EXPECT_GT(r.size_bytes, 0u);
}

TEST(Config, SurrogateDefaultsPlantedFromSeed) {
  const json j = json::parse(R"({"target_bytes": 2000, "seed": 4, "evaluator": {"kind": "surrogate"}})");
  const auto rc = parse_run_config(j);
  const auto a = resolve_surrogate(rc);
  EXPECT_EQ(a.planted, resolve_surrogate(rc).planted);
  EXPECT_EQ(a.profile, rc.search.space.profile);
  auto ev = make_evaluator(rc);
  EXPECT_EQ(ev->evaluate(a.planted).accuracy, 1.0);

  json k = j;
  k["evaluator"]["planted"] = genome_to_json(a.planted);
  k["seed"] = 5;
  EXPECT_EQ(resolve_surrogate(parse_run_config(k)).planted, a.planted);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_run_config(json::object()), FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"target_mb", 1.0}}), FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"populaton_size", 3}}), FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"mode", "both"}}), FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", "big"}}), FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_mb", -1.0}}), InvalidArgument);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"space", {{"bit_choices", {0}}}}}),
               InvalidArgument);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"space", {{"bit_choices", {17}}}}}),
               InvalidArgument);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"space", {{"ops", {"conv_7"}}}}}),
               FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"evaluator", {{"kind", "oracle"}}}}),
               FormatError);
  EXPECT_THROW(parse_run_config(json{{"target_bytes", 1}, {"grid", {{1, 2, 3}}}}), FormatError);
}

TEST(Config, LoadFromFile) {
  testing::TempDir dir("config");
  {
    std::ofstream(dir.file("ok.json")) << R"({"target_bytes": 10, "population_size": 4, "sample_size": 2})";
    std::ofstream(dir.file("bad.json")) << "{ not json";
  }
  EXPECT_EQ(load_run_config(dir.file("ok.json")).search.population_size, 4);
  EXPECT_THROW(load_run_config(dir.file("bad.json")), FormatError);
  EXPECT_THROW(load_run_config(dir.file("missing.json")), IoError);
}

}  // namespace
}  // namespace evoquant
