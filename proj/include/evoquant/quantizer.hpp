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

// Bucketed linear-scaling quantization.
//
// A weight vector is cut into buckets of k consecutive values. Each bucket is
// min-max scaled into [0, 1], every scaled value is snapped to the grid
// {0, 1/2^b, ..., 1}, and the bucket keeps its offset/range so the inverse
// map can restore magnitudes:
//
//   w_hat = nu * Q(x, b) + mu,   x = (w - mu) / nu
//   Q(x, b) = floor(x 2^b) / 2^b + xi / 2^b,  xi = [frac(x 2^b) > 0.5]
//
// Codes are the grid indices round(Q * 2^b) and live in [0, 2^b], i.e. the
// alphabet has 2^b + 1 symbols.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evoquant/error.hpp"
#include "evoquant/huffman.hpp"
#include "evoquant/tensor_model.hpp"

namespace evoquant {

inline constexpr double kDegenerateRange = 1e-12;
inline constexpr std::size_t kDefaultBucketSize = 256;

class BitWidth {
 public:
  constexpr explicit BitWidth(int bits) : bits_(bits) {
    if (bits < 1 || bits > 30) throw InvalidArgument("bit width must be in [1, 30]");
  }
  constexpr int bits() const { return bits_; }
  constexpr std::uint32_t levels() const { return std::uint32_t{1} << bits_; }  // 2^b
  constexpr std::uint32_t alphabet_size() const { return levels() + 1; }
  friend constexpr bool operator==(BitWidth, BitWidth) = default;

 private:
  int bits_;
};

struct ScaleParams {
  double mu = 0.0;  // bucket offset
  double nu = 0.0;  // bucket range; 0 marks a constant (degenerate) bucket
  bool operator==(const ScaleParams&) const = default;
};

// Entropy-coded form of a tensor's codes.
struct CodedPayload {
  Codebook book;
  EncodedStream stream;
  bool operator==(const CodedPayload&) const = default;
};

struct QuantizedTensor {
  std::string name;
  Shape shape;
  std::optional<std::uint16_t> cell_index;
  BitWidth bit_width{8};
  std::size_t bucket_size = kDefaultBucketSize;
  std::vector<ScaleParams> scales;
  std::vector<std::uint32_t> codes;
  std::optional<CodedPayload> codec_payload;  // empty until entropy_encode()

  std::size_t value_count() const { return codes.size(); }
  std::size_t bucket_count() const {
    return (codes.size() + bucket_size - 1) / bucket_size;
  }
  bool operator==(const QuantizedTensor&) const = default;
};

struct ScaledBucket {
  std::vector<double> scaled;
  ScaleParams params;
};

// Min-max normalization of one bucket into [0, 1].
inline ScaledBucket scale_bucket(std::span<const double> values) {
  require(!values.empty(), "empty bucket");
  for (double v : values) require(std::isfinite(v), "non-finite value");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  ScaledBucket out;
  out.params.mu = *lo;
  out.params.nu = *hi - *lo;
  out.scaled.assign(values.size(), 0.0);
  if (out.params.nu < kDegenerateRange) {
    out.params.nu = 0.0;
    return out;
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    out.scaled[i] = std::clamp((values[i] - out.params.mu) / out.params.nu, 0.0, 1.0);
  return out;
}

struct GridPoint {
  double value;
  std::uint32_t code;
};

// Snaps x in [0, 1] to the b-bit grid; an exact .5 fraction rounds down.
inline GridPoint quantize_unit(double x, BitWidth b) {
  require(x >= 0.0 && x <= 1.0, "x outside [0, 1]");
  const double levels = static_cast<double>(b.levels());
  const double scaled = x * levels;  // exact: power-of-two scaling
  const double whole = std::floor(scaled);
  const double xi = (scaled - whole > 0.5) ? 1.0 : 0.0;
  const auto code = static_cast<std::uint32_t>(whole + xi);
  return {static_cast<double>(code) / levels, code};
}

namespace detail {

// Scale parameters are stored as binary32. Round mu down and nu up so the
// stored interval still covers [lo, hi].
inline ScaleParams storable_scale(double lo, double hi) {
  float mu = static_cast<float>(lo);
  if (static_cast<double>(mu) > lo) mu = std::nextafter(mu, -std::numeric_limits<float>::infinity());
  float nu = static_cast<float>(hi - static_cast<double>(mu));
  while (static_cast<double>(mu) + static_cast<double>(nu) < hi)
    nu = std::nextafter(nu, std::numeric_limits<float>::infinity());
  return {mu, nu};
}

}  // namespace detail

inline QuantizedTensor quantize_tensor(const WeightTensor& tensor, BitWidth b,
                                       std::size_t bucket_size = kDefaultBucketSize) {
  require(bucket_size >= 2, "bucket size must be >= 2");
  validate_tensor(tensor);
  QuantizedTensor qt{tensor.name, tensor.shape, tensor.cell_index, b, bucket_size, {}, {}, {}};
  const std::size_t n = tensor.values.size();
  qt.codes.resize(n);
  qt.scales.reserve(qt.bucket_count());
  for (std::size_t start = 0; start < n; start += bucket_size) {
    const std::size_t len = std::min(bucket_size, n - start);
    std::span<const double> bucket(tensor.values.data() + start, len);
    const auto [lo, hi] = std::minmax_element(bucket.begin(), bucket.end());
    if (*hi - *lo < kDegenerateRange) {
      qt.scales.push_back({static_cast<float>(*lo), 0.0});
      continue;  // codes stay 0
    }
    const ScaleParams p = detail::storable_scale(*lo, *hi);
    qt.scales.push_back(p);
    for (std::size_t i = 0; i < len; ++i) {
      const double x = std::clamp((bucket[i] - p.mu) / p.nu, 0.0, 1.0);
      qt.codes[start + i] = quantize_unit(x, b).code;
    }
  }
  return qt;
}

inline void validate(const QuantizedTensor& qt) {
  require(qt.bucket_size >= 2, "bucket size must be >= 2");
  require(shape_product(qt.shape) == qt.codes.size(), "shape/code count mismatch in " + qt.name);
  require(qt.scales.size() == qt.bucket_count(), "scale/bucket count mismatch in " + qt.name);
  const std::uint32_t max_code = qt.bit_width.levels();
  for (auto c : qt.codes) require(c <= max_code, "code out of range in " + qt.name);
  for (const auto& s : qt.scales)
    require(std::isfinite(s.mu) && std::isfinite(s.nu) && s.nu >= 0.0,
            "bad scale parameters in " + qt.name);
}

inline WeightTensor dequantize_tensor(const QuantizedTensor& qt) {
  validate(qt);
  WeightTensor out{qt.name, qt.shape, std::vector<double>(qt.codes.size()), qt.cell_index};
  const double levels = static_cast<double>(qt.bit_width.levels());
  for (std::size_t i = 0; i < qt.codes.size(); ++i) {
    const ScaleParams& s = qt.scales[i / qt.bucket_size];
    out.values[i] = s.nu == 0.0 ? s.mu : s.nu * (static_cast<double>(qt.codes[i]) / levels) + s.mu;
  }
  return out;
}

// Worst-case elementwise reconstruction error of a quantized tensor.
inline double reconstruction_bound(const QuantizedTensor& qt) {
  double nu = 0.0;
  for (const auto& s : qt.scales) nu = std::max(nu, s.nu);
  return std::ldexp(nu, -(qt.bit_width.bits() + 1));
}

// kf / (kb + 2f)
inline double theoretical_ratio(std::size_t bucket_size, int float_bits, BitWidth b) {
  const double k = static_cast<double>(bucket_size);
  const double f = float_bits;
  return k * f / (k * b.bits() + 2.0 * f);
}

// bN + 2f * ceil(N / k)
inline std::uint64_t theoretical_bits(std::uint64_t n, BitWidth b, std::size_t bucket_size,
                                      int float_bits) {
  require(n >= 1, "value count must be >= 1");
  const std::uint64_t buckets = (n + bucket_size - 1) / bucket_size;
  return static_cast<std::uint64_t>(b.bits()) * n +
         2u * static_cast<std::uint64_t>(float_bits) * buckets;
}

}  // namespace evoquant
