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
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evoquant/error.hpp"
#include "evoquant/random.hpp"

namespace evoquant {

// Row-major n x d features with class labels and a train/validation split.
struct Dataset {
  int classes = 0;
  int dims = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const { return features.data() + i * dims; }
  bool operator==(const Dataset&) const = default;
};

namespace detail {

// Seeded 80/20 split of n sample indices.
inline void split_80_20(Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5b117ull));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t n_train = (order.size() * 4) / 5;
  data.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(data.train.begin(), data.train.end());
  std::sort(data.validation.begin(), data.validation.end());
}

}  // namespace detail

// C isotropic Gaussian clusters with centers drawn uniformly from the unit
// hypercube; sample i belongs to class i mod C, so classes are balanced.
inline Dataset make_blobs(int classes, int dims, int samples, double spread, std::uint64_t seed) {
  require(classes >= 2, "need at least 2 classes");
  require(dims >= 2, "need at least 2 dimensions");
  require(samples >= 10 * classes, "need at least 10 samples per class");
  require(spread >= 0.0 && std::isfinite(spread), "spread must be finite and non-negative");
  Dataset data;
  data.classes = classes;
  data.dims = dims;
  data.seed = seed;
  Rng rng(seed);
  std::vector<double> centers(static_cast<std::size_t>(classes) * dims);
  for (auto& c : centers) c = rng.uniform();
  data.features.resize(static_cast<std::size_t>(samples) * dims);
  data.labels.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const int label = i % classes;
    data.labels[i] = label;
    for (int k = 0; k < dims; ++k)
      data.features[static_cast<std::size_t>(i) * dims + k] =
          centers[static_cast<std::size_t>(label) * dims + k] + spread * rng.normal();
  }
  detail::split_80_20(data, seed);
  return data;
}

// Writes header "f0,...,f{d-1},label" followed by one row per sample.
inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (int k = 0; k < data.dims; ++k) out << 'f' << k << ',';
  out << "label\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int k = 0; k < data.dims; ++k) out << data.row(i)[k] << ',';
    out << data.labels[i] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset load_csv(const std::string& path, std::uint64_t split_seed = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty csv");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label") throw FormatError("missing label column");
  Dataset data;
  data.dims = static_cast<int>(header.size()) - 1;
  for (int k = 0; k < data.dims; ++k)
    if (header[k] != "f" + std::to_string(k)) throw FormatError("bad header column " + header[k]);
  std::set<int> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw FormatError("ragged row " + std::to_string(row));
    try {
      for (int k = 0; k < data.dims; ++k) {
        std::size_t used = 0;
        const double v = std::stod(cells[k], &used);
        if (used != cells[k].size() || !std::isfinite(v)) throw std::invalid_argument(cells[k]);
        data.features.push_back(v);
      }
      std::size_t used = 0;
      const int label = std::stoi(cells.back(), &used);
      if (used != cells.back().size() || label < 0) throw std::invalid_argument(cells.back());
      data.labels.push_back(label);
      seen.insert(label);
    } catch (const std::logic_error&) {
      throw FormatError("bad number in row " + std::to_string(row));
    }
  }
  if (data.labels.empty()) throw FormatError("csv has no rows");
  if (*seen.rbegin() + 1 != static_cast<int>(seen.size()))
    throw FormatError("labels are not contiguous from 0");
  data.classes = static_cast<int>(seen.size());
  data.seed = split_seed;
  detail::split_80_20(data, split_seed);
  return data;
}

}  // namespace evoquant
