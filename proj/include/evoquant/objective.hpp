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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "evoquant/error.hpp"

namespace evoquant {

inline constexpr double kBytesPerMB = 1e6;

struct FitnessRecord {
  double accuracy = 0.0;
  std::uint64_t size_bytes = 0;
  std::uint64_t target_bytes = 0;
  double fitness = 0.0;
  bool operator==(const FitnessRecord&) const = default;
};

// Size-penalized accuracy: F = accuracy while the model fits the target,
// accuracy * target / size once it exceeds it.
inline FitnessRecord fitness(double accuracy, std::uint64_t size_bytes,
                             std::uint64_t target_bytes) {
  require(accuracy >= 0.0 && accuracy <= 1.0, "accuracy outside [0, 1]");
  require(size_bytes > 0 && target_bytes > 0, "sizes must be positive");
  FitnessRecord r{accuracy, size_bytes, target_bytes, accuracy};
  if (size_bytes > target_bytes)
    r.fitness = accuracy * static_cast<double>(target_bytes) / static_cast<double>(size_bytes);
  return r;
}

struct TradeoffPoint {
  double accuracy = 0.0;
  std::uint64_t size_bytes = 0;
  bool operator==(const TradeoffPoint&) const = default;
};

// Indices of the non-dominated points, ordered by size ascending. A point is
// dominated when another has accuracy >= and size <= with one strict.
// Duplicates collapse to the earliest index.
inline std::vector<std::size_t> pareto_indices(const std::vector<TradeoffPoint>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].size_bytes != points[b].size_bytes)
      return points[a].size_bytes < points[b].size_bytes;
    return points[a].accuracy > points[b].accuracy;
  });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    // Sorted by size, then accuracy descending: a point survives iff it is
    // strictly more accurate than everything smaller or equal before it.
    if (front.empty() || points[i].accuracy > points[front.back()].accuracy) front.push_back(i);
  }
  return front;
}

inline std::vector<TradeoffPoint> pareto_front(const std::vector<TradeoffPoint>& points) {
  std::vector<TradeoffPoint> out;
  for (auto i : pareto_indices(points)) out.push_back(points[i]);
  return out;
}

}  // namespace evoquant
