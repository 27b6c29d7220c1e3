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

// Tournament-selection evolution over model genomes.
//
// Each step samples #S individuals without replacement, mutates the fittest
// of the sample into a child (architecture then policy in joint mode, policy
// only in policy-only mode), evaluates the child, inserts it and evicts the
// least fit member of the sample. The population size stays #P.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "evoquant/error.hpp"
#include "evoquant/evaluator.hpp"
#include "evoquant/objective.hpp"
#include "evoquant/random.hpp"
#include "evoquant/search_space.hpp"
#include "json.hpp"

namespace evoquant {

enum class SearchMode { kJoint, kPolicyOnly };

inline constexpr int kMaxEvaluationRetries = 3;

struct Individual {
  ModelGenome genome;
  EvalResult result;
  FitnessRecord fitness;
  int birth_iteration = 0;
  std::uint64_t id = 0;
};

struct SearchConfig {
  int population_size = 16;  // #P
  int sample_size = 16;      // #S
  int max_iterations = 100;  // #E
  std::uint64_t target_bytes = 1;
  SearchMode mode = SearchMode::kJoint;
  SpaceConfig space;  // space.profile is the search profile
  StackingProfile evaluation_profile = StackingProfile::cifar(1, 8);
  std::size_t bucket_size = kDefaultBucketSize;
  std::uint64_t seed = 0;
  std::vector<ModelGenome> seed_individuals;
  // Architecture used for random individuals in policy-only mode.
  std::optional<ModelGenome> base_genome;
};

inline void validate(const SearchConfig& c) {
  require(c.sample_size >= 2, "sample size must be >= 2");
  require(c.sample_size <= c.population_size, "sample size exceeds population size");
  require(c.max_iterations >= 0, "max_iterations must be >= 0");
  require(c.target_bytes > 0, "target size must be positive");
  require(static_cast<int>(c.seed_individuals.size()) <= c.population_size,
          "more seed individuals than population size");
  if (c.mode == SearchMode::kPolicyOnly)
    require(c.base_genome.has_value() || !c.seed_individuals.empty(),
            "policy-only search needs a base architecture");
}

struct PopulationStats {
  double mean = 0.0;
  double std = 0.0;  // population (1/n) standard deviation
  double best = 0.0;
  bool operator==(const PopulationStats&) const = default;
};

struct Population {
  std::vector<Individual> members;
  std::uint64_t next_id = 0;
  double running_best = -1.0;  // best fitness ever evaluated
};

inline PopulationStats population_stats(const std::vector<Individual>& members) {
  require(!members.empty(), "empty population");
  PopulationStats s;
  s.best = members.front().fitness.fitness;
  for (const auto& m : members) {
    s.mean += m.fitness.fitness;
    s.best = std::max(s.best, m.fitness.fitness);
  }
  s.mean /= static_cast<double>(members.size());
  double var = 0.0;
  for (const auto& m : members) var += (m.fitness.fitness - s.mean) * (m.fitness.fitness - s.mean);
  s.std = std::sqrt(var / static_cast<double>(members.size()));
  return s;
}

struct StepRecord {
  int iteration = 0;
  Individual child;
  std::uint64_t parent_id = 0;
  std::uint64_t evicted_id = 0;
  int retries = 0;
  PopulationStats stats;  // after insertion and eviction
  double running_best = 0.0;
};

struct SearchHistory {
  std::vector<Individual> initial;
  PopulationStats initial_stats;
  double initial_running_best = 0.0;
  std::vector<StepRecord> steps;
  Population final_population;

  // Mean/std/running-best per iteration, iteration 0 = initial population.
  std::vector<PopulationStats> curve() const {
    std::vector<PopulationStats> out{{initial_stats.mean, initial_stats.std, initial_running_best}};
    for (const auto& s : steps) out.push_back({s.stats.mean, s.stats.std, s.running_best});
    return out;
  }

  const Individual& best() const {
    const Individual* best = &initial.front();
    for (const auto& i : initial)
      if (i.fitness.fitness > best->fitness.fitness) best = &i;
    for (const auto& s : steps)
      if (s.child.fitness.fitness > best->fitness.fitness) best = &s.child;
    return *best;
  }
};

namespace detail {

inline Individual make_individual(Population& pop, ModelGenome genome, EvalResult result,
                                  std::uint64_t target, int iteration) {
  Individual ind;
  ind.fitness = fitness(result.accuracy, result.size_bytes, target);
  ind.genome = std::move(genome);
  ind.result = std::move(result);
  ind.birth_iteration = iteration;
  ind.id = pop.next_id++;
  pop.running_best = std::max(pop.running_best, ind.fitness.fitness);
  return ind;
}

inline ModelGenome random_member(const SearchConfig& config, Rng& rng) {
  if (config.mode == SearchMode::kJoint) return random_genome(config.space, rng);
  ModelGenome g = config.base_genome ? *config.base_genome : config.seed_individuals.front();
  g.policy = random_policy(config.space, rng);
  return g;
}

}  // namespace detail

// Seeds first, then random genomes, all evaluated. In policy-only mode the
// random members share the base architecture.
inline Population init_population(const SearchConfig& config, Rng& rng, Evaluator& evaluator) {
  validate(config);
  Population pop;
  for (int i = 0; i < config.population_size; ++i) {
    const bool seeded = i < static_cast<int>(config.seed_individuals.size());
    for (int attempt = 0;; ++attempt) {
      ModelGenome g = seeded ? config.seed_individuals[i] : detail::random_member(config, rng);
      require_valid(g, config.space);
      try {
        EvalResult r = evaluator.evaluate(g);
        pop.members.push_back(
            detail::make_individual(pop, std::move(g), std::move(r), config.target_bytes, 0));
        break;
      } catch (const EvaluationError&) {
        if (seeded || attempt >= kMaxEvaluationRetries) throw;
      }
    }
  }
  return pop;
}

// One tournament round. Ties in best/worst selection go to the lower id.
inline StepRecord evolve_step(Population& pop, const SearchConfig& config, Rng& rng,
                              Evaluator& evaluator, int iteration) {
  const std::size_t n = pop.members.size();
  require(static_cast<int>(n) == config.population_size, "population size mismatch");
  // Partial Fisher-Yates: the first #S entries of `idx` are the sample.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const auto s = static_cast<std::size_t>(config.sample_size);
  for (std::size_t i = 0; i < s; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);

  std::size_t best = idx[0];
  std::size_t worst = idx[0];
  auto better = [&](std::size_t a, std::size_t b) {  // a strictly preferred as best
    const double fa = pop.members[a].fitness.fitness, fb = pop.members[b].fitness.fitness;
    return fa > fb || (fa == fb && pop.members[a].id < pop.members[b].id);
  };
  auto worse = [&](std::size_t a, std::size_t b) {  // a strictly preferred as worst
    const double fa = pop.members[a].fitness.fitness, fb = pop.members[b].fitness.fitness;
    return fa < fb || (fa == fb && pop.members[a].id < pop.members[b].id);
  };
  for (std::size_t i = 1; i < s; ++i) {
    if (better(idx[i], best)) best = idx[i];
    if (worse(idx[i], worst)) worst = idx[i];
  }

  const Individual& parent = pop.members[best];
  StepRecord rec;
  rec.iteration = iteration;
  rec.parent_id = parent.id;
  for (int attempt = 0;; ++attempt) {
    ModelGenome child = config.mode == SearchMode::kJoint
                            ? mutate_policy(mutate_architecture(parent.genome, config.space, rng),
                                            config.space, rng)
                            : mutate_policy(parent.genome, config.space, rng);
    try {
      EvalResult r = evaluator.evaluate(child);
      rec.child = detail::make_individual(pop, std::move(child), std::move(r), config.target_bytes,
                                          iteration);
      rec.retries = attempt;
      break;
    } catch (const EvaluationError&) {
      if (attempt >= kMaxEvaluationRetries) throw;
    }
  }
  rec.evicted_id = pop.members[worst].id;
  pop.members[worst] = rec.child;  // push child, pop worst
  rec.stats = population_stats(pop.members);
  rec.running_best = pop.running_best;
  return rec;
}

// Initial population plus max_iterations tournament steps; deterministic for
// a given config (including seed) and a deterministic evaluator.
inline SearchHistory run_search(const SearchConfig& config, Evaluator& evaluator) {
  validate(config);
  Rng rng(config.seed);
  SearchHistory history;
  Population pop = init_population(config, rng, evaluator);
  history.initial = pop.members;
  history.initial_stats = population_stats(pop.members);
  history.initial_running_best = pop.running_best;
  for (int i = 1; i <= config.max_iterations; ++i)
    history.steps.push_back(evolve_step(pop, config, rng, evaluator, i));
  history.final_population = std::move(pop);
  return history;
}

// ---------------------------------------------------------------------------
// History serialization

inline nlohmann::ordered_json individual_to_json(const Individual& ind) {
  nlohmann::ordered_json j;
  j["id"] = ind.id;
  j["birth_iteration"] = ind.birth_iteration;
  j["genome"] = genome_to_json(ind.genome);
  j["accuracy"] = ind.result.accuracy;
  j["size_bytes"] = ind.result.size_bytes;
  j["fitness"] = ind.fitness.fitness;
  return j;
}

// JSON lines: record 0 holds the initial population, record i >= 1 the
// child, parent and evicted individual of iteration i. Every record carries
// the population statistics after that iteration.
inline void write_history(const SearchHistory& h, std::ostream& out) {
  nlohmann::ordered_json first;
  first["iteration"] = 0;
  auto members = nlohmann::ordered_json::array();
  for (const auto& ind : h.initial) members.push_back(individual_to_json(ind));
  first["population"] = std::move(members);
  first["mean_fitness"] = h.initial_stats.mean;
  first["std_fitness"] = h.initial_stats.std;
  first["population_best_fitness"] = h.initial_stats.best;
  first["running_best_fitness"] = h.initial_running_best;
  out << first.dump() << '\n';
  for (const auto& s : h.steps) {
    nlohmann::ordered_json j;
    j["iteration"] = s.iteration;
    j["child_id"] = s.child.id;
    j["child_fitness"] = s.child.fitness.fitness;
    j["child"] = individual_to_json(s.child);
    j["parent_id"] = s.parent_id;
    j["evicted_id"] = s.evicted_id;
    j["retries"] = s.retries;
    j["mean_fitness"] = s.stats.mean;
    j["std_fitness"] = s.stats.std;
    j["population_best_fitness"] = s.stats.best;
    j["running_best_fitness"] = s.running_best;
    out << j.dump() << '\n';
  }
}

inline std::string history_string(const SearchHistory& h) {
  std::ostringstream os;
  write_history(h, os);
  return os.str();
}

// Every evaluated individual (initial members and children) of a history
// file, as (accuracy, size) points, plus the curve rows.
struct ParsedHistory {
  std::vector<TradeoffPoint> points;
  std::vector<std::uint64_t> ids;
  std::vector<std::pair<int, PopulationStats>> curve;
};

inline ParsedHistory parse_history(std::istream& in) {
  ParsedHistory out;
  std::string line;
  std::size_t lineno = 0;
  auto add = [&](const nlohmann::json& ind) {
    out.points.push_back({ind.at("accuracy").get<double>(), ind.at("size_bytes").get<std::uint64_t>()});
    out.ids.push_back(ind.at("id").get<std::uint64_t>());
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("population"))
        for (const auto& ind : j.at("population")) add(ind);
      if (j.contains("child")) add(j.at("child"));
      out.curve.push_back({j.at("iteration").get<int>(),
                           {j.at("mean_fitness").get<double>(), j.at("std_fitness").get<double>(),
                            j.at("running_best_fitness").get<double>()}});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad history record at line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.curve.empty()) throw FormatError("empty history");
  return out;
}

// ---------------------------------------------------------------------------
// Population/sample size sweep

struct SweepPair {
  int population_size;
  int sample_size;
};

struct SweepCurve {
  SweepPair pair;
  std::vector<PopulationStats> stats;  // iterations 0..max_iterations
};

using EvaluatorFactory = std::function<std::unique_ptr<Evaluator>()>;

// Runs one search per (#P, #S) pair from `base` (same master seed for every
// pair), up to `threads` at a time. Each run gets its own evaluator.
inline std::vector<SweepCurve> sweep(const std::vector<SweepPair>& grid, const SearchConfig& base,
                                     const EvaluatorFactory& make_evaluator,
                                     unsigned threads = std::max(1u, std::thread::hardware_concurrency())) {
  require(!grid.empty(), "empty grid");
  for (const auto& p : grid) {
    SearchConfig c = base;
    c.population_size = p.population_size;
    c.sample_size = p.sample_size;
    validate(c);
  }
  std::vector<SweepCurve> curves(grid.size());
  auto run_one = [&](std::size_t i) {
    SearchConfig c = base;
    c.population_size = grid[i].population_size;
    c.sample_size = grid[i].sample_size;
    auto evaluator = make_evaluator();
    curves[i] = {grid[i], run_search(c, *evaluator).curve()};
  };
  for (std::size_t start = 0; start < grid.size(); start += threads) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = start; i < std::min(grid.size(), start + threads); ++i)
      jobs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, run_one, i));
    for (auto& j : jobs) j.get();
  }
  return curves;
}

// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) { return nlohmann::json(v).dump(); }

inline void write_curve_csv(const std::vector<PopulationStats>& curve, std::ostream& out) {
  out << "iteration,mean_fitness,std_fitness,best_fitness\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << i << ',' << format_number(curve[i].mean) << ',' << format_number(curve[i].std) << ','
        << format_number(curve[i].best) << '\n';
}

}  // namespace evoquant
