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


// Quantizes one random tensor at several bit widths and prints size and
// reconstruction error.

#include <cmath>
#include <cstdio>

#include "evoquant.hpp"

using namespace evoquant;

int main() {
  Rng rng(1);
  FloatModel model;
  WeightTensor t{"layer.weight", {64, 64}, {}, 0};
  for (int i = 0; i < 64 * 64; ++i) t.values.push_back(static_cast<float>(0.1 * rng.normal()));
  model.tensors.push_back(t);
  const std::size_t float_bytes = save_float_model(model).size();

  std::printf("float model: %zu bytes\n", float_bytes);
  std::printf("%4s %10s %10s %12s %12s\n", "bits", "bytes", "ratio", "max error", "bound");
  for (int b : {2, 4, 8, 16}) {
    const int policy[] = {b};
    const QuantizedModel qm = quantize_model(model, policy);
    const FloatModel back = dequantize_model(qm);
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      worst = std::max(worst, std::fabs(back.tensors[0].values[i] - t.values[i]));
    const std::size_t bytes = serialized_size(qm);
    std::printf("%4d %10zu %10.3f %12.3e %12.3e\n", b, bytes,
                static_cast<double>(float_bytes) / static_cast<double>(bytes), worst,
                reconstruction_bound(qm.tensors[0]));
  }
}
