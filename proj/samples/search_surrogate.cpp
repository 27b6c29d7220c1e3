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


// Runs a joint search against the planted surrogate and prints the curve.

#include <cstdio>

#include "evoquant.hpp"

using namespace evoquant;

int main() {
  SearchConfig config;
  config.population_size = 16;
  config.sample_size = 8;
  config.max_iterations = 200;
  config.space.combinations = 2;
  config.space.profile = StackingProfile::custom("NNRNNRNN", 8);
  config.seed = 7;

  SurrogateSpec spec;
  Rng rng(3);
  spec.planted = random_genome(config.space, rng);
  spec.profile = config.space.profile;
  config.target_bytes = planted_max_size(spec, config.space.bit_choices);

  SurrogateEvaluator evaluator(spec);
  const SearchHistory history = run_search(config, evaluator);
  const auto curve = history.curve();
  for (std::size_t i = 0; i < curve.size(); i += 20)
    std::printf("iteration %3zu  mean %.4f  std %.4f  best %.4f\n", i, curve[i].mean, curve[i].std,
                curve[i].best);
  const Individual& best = history.best();
  std::printf("best: accuracy %.4f, %llu bytes, fitness %.4f\n", best.fitness.accuracy,
              static_cast<unsigned long long>(best.fitness.size_bytes), best.fitness.fitness);
  std::printf("planted architecture found: %s\n",
              architecture_key(best.genome) == architecture_key(spec.planted) ? "yes" : "no");
}
