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
#include <limits>
#include <set>

#include "evoquant/dataset.hpp"
#include "test_util.hpp"

namespace evoquant {
namespace {

// Nearest class mean (means from the training split) on the validation split.
double nearest_centroid_accuracy(const Dataset& d) {
  std::vector<double> centers(static_cast<std::size_t>(d.classes) * d.dims, 0.0);
  std::vector<int> counts(d.classes, 0);
  for (auto i : d.train) {
    ++counts[d.labels[i]];
    for (int k = 0; k < d.dims; ++k) centers[d.labels[i] * d.dims + k] += d.row(i)[k];
  }
  for (int c = 0; c < d.classes; ++c)
    for (int k = 0; k < d.dims; ++k) centers[c * d.dims + k] /= counts[c];
  int correct = 0;
  for (auto i : d.validation) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < d.classes; ++c) {
      double dist = 0;
      for (int k = 0; k < d.dims; ++k) {
        const double diff = d.row(i)[k] - centers[c * d.dims + k];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    correct += best == d.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(d.validation.size());
}

TEST(Blobs, Deterministic) {
  EXPECT_EQ(make_blobs(4, 16, 2000, 0.15, 7), make_blobs(4, 16, 2000, 0.15, 7));
  EXPECT_NE(make_blobs(4, 16, 2000, 0.15, 7).features, make_blobs(4, 16, 2000, 0.15, 8).features);
}

TEST(Blobs, SplitAndBalance) {
  const Dataset d = make_blobs(3, 5, 301, 0.2, 1);
  EXPECT_EQ(d.size(), 301u);
  EXPECT_EQ(d.train.size() + d.validation.size(), 301u);
  EXPECT_EQ(d.train.size(), 240u);
  std::set<std::size_t> all(d.train.begin(), d.train.end());
  for (auto i : d.validation) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 301u);
  std::vector<int> counts(3, 0);
  for (int l : d.labels) ++counts[l];
  EXPECT_LE(*std::max_element(counts.begin(), counts.end()) -
                *std::min_element(counts.begin(), counts.end()),
            1);
}

TEST(Blobs, SeparableLimit) {
  EXPECT_EQ(nearest_centroid_accuracy(make_blobs(4, 16, 2000, 0.0, 3)), 1.0);
}

TEST(Blobs, DefaultTaskCentroidOracle) {
  EXPECT_GE(nearest_centroid_accuracy(make_blobs(4, 16, 2000, 0.15, 7)), 0.95);
}

TEST(Blobs, InvalidSizes) {
  EXPECT_THROW(make_blobs(1, 16, 2000, 0.1, 1), InvalidArgument);
  EXPECT_THROW(make_blobs(4, 1, 2000, 0.1, 1), InvalidArgument);
  EXPECT_THROW(make_blobs(4, 16, 39, 0.1, 1), InvalidArgument);
  EXPECT_THROW(make_blobs(4, 16, 40, -1.0, 1), InvalidArgument);
}

TEST(Csv, SmallFile) {
  testing::TempDir dir("csv");
  std::ofstream(dir.file("d.csv")) << "f0,f1,label\n1,2,0\n3.5,-4,1\n0,0,1\n";
  const Dataset d = load_csv(dir.file("d.csv"));
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.dims, 2);
  EXPECT_EQ(d.classes, 2);
  EXPECT_EQ(d.features, (std::vector<double>{1, 2, 3.5, -4, 0, 0}));
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 1}));
}

TEST(Csv, Errors) {
  testing::TempDir dir("csv");
  std::ofstream(dir.file("a.csv")) << "f0,f1\n1,2\n";
  EXPECT_THROW(load_csv(dir.file("a.csv")), FormatError);
  std::ofstream(dir.file("b.csv")) << "f0,f1,label\n1,2,0\n1,0\n";
  EXPECT_THROW(load_csv(dir.file("b.csv")), FormatError);
  std::ofstream(dir.file("c.csv")) << "f0,f1,label\n1,2,0\n1,0,2\n";
  EXPECT_THROW(load_csv(dir.file("c.csv")), FormatError);
  std::ofstream(dir.file("d.csv")) << "f0,f1,label\n1,x,0\n";
  EXPECT_THROW(load_csv(dir.file("d.csv")), FormatError);
  EXPECT_THROW(load_csv(dir.file("missing.csv")), IoError);
}

TEST(Csv, ExportImportRoundTrip) {
  testing::TempDir dir("csv");
  const Dataset d = make_blobs(3, 4, 90, 0.3, 5);
  save_csv(d, dir.file("d.csv"));
  const Dataset back = load_csv(dir.file("d.csv"), 5);
  EXPECT_EQ(back, d);
}

}  // namespace
}  // namespace evoquant
