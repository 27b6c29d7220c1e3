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

// Weight tensors, float model containers and the JSQW file format.
//
// JSQW layout (all integers little-endian):
//
//   "JSQW" | u16 version (=1) | u16 float_width_bits | u16 tensor count
//   per tensor:
//     u8 name length | name bytes (UTF-8)
//     u8 rank | rank x u32 dims
//     u8 has_cell_index | u16 cell index (0 when absent)
//     product(dims) values, IEEE binary16/32/64 per float_width_bits
//   u32 metadata length | metadata JSON object (UTF-8)

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "evoquant/binary_io.hpp"
#include "evoquant/error.hpp"
#include "json.hpp"

namespace evoquant {

inline constexpr std::size_t kMaxTensorCount = 65535;
inline constexpr std::size_t kMaxNameLength = 255;
inline constexpr std::uint16_t kFormatVersion = 1;

using Shape = std::vector<std::uint32_t>;
using Metadata = std::map<std::string, std::string>;

inline std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

struct WeightTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;  // row-major
  std::optional<std::uint16_t> cell_index;

  std::size_t size() const { return values.size(); }
  bool operator==(const WeightTensor&) const = default;
};

struct FloatModel {
  std::vector<WeightTensor> tensors;
  Metadata metadata;
  int float_width_bits = 32;

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  // Number of cells tagged in the model (max cell_index + 1, 0 if untagged).
  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors)
      if (t.cell_index) n = std::max<std::size_t>(n, *t.cell_index + 1u);
    return n;
  }

  const WeightTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  bool operator==(const FloatModel&) const = default;
};

inline void validate_tensor(const WeightTensor& t) {
  require(!t.name.empty(), "empty tensor name");
  require(t.name.size() <= kMaxNameLength, "tensor name too long: " + t.name);
  require(!t.shape.empty() && t.shape.size() <= 255, "bad rank for tensor " + t.name);
  for (auto d : t.shape) require(d > 0, "zero dimension in tensor " + t.name);
  require(shape_product(t.shape) == t.values.size(), "shape/value count mismatch in " + t.name);
  for (double v : t.values) require(std::isfinite(v), "non-finite value in " + t.name);
}

// Checks every FloatModel invariant, including that each value is exactly
// representable at float_width_bits (so that save/load is the identity).
inline void validate(const FloatModel& m) {
  require(!m.tensors.empty(), "empty model");
  require(m.tensors.size() <= kMaxTensorCount, "too many tensors");
  require(m.float_width_bits == 16 || m.float_width_bits == 32 || m.float_width_bits == 64,
          "float_width_bits must be 16, 32 or 64");
  std::set<std::string> names;
  std::set<std::uint16_t> cells;
  for (const auto& t : m.tensors) {
    validate_tensor(t);
    require(names.insert(t.name).second, "duplicate tensor name: " + t.name);
    if (t.cell_index) cells.insert(*t.cell_index);
    for (double v : t.values)
      require(round_to_width(v, m.float_width_bits) == v,
              "value not representable at float width in " + t.name);
  }
  if (!cells.empty())
    require(*cells.rbegin() + 1u == cells.size(), "cell indices not contiguous from 0");
}

// Rounds all values to the model's float width in place.
inline void round_values(FloatModel& m) {
  for (auto& t : m.tensors)
    for (auto& v : t.values) v = round_to_width(v, m.float_width_bits);
}

// f * N: storage of all values at full precision, headers excluded.
inline std::uint64_t float_size_bits(const FloatModel& m) {
  return static_cast<std::uint64_t>(m.float_width_bits) * m.value_count();
}

namespace detail {

inline void write_metadata(ByteWriter& w, const Metadata& metadata) {
  const std::string blob = nlohmann::json(metadata).dump();
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.raw(blob);
}

inline Metadata read_metadata(ByteReader& r) {
  const auto n = r.u32();
  const auto blob = r.str(n);
  try {
    auto j = nlohmann::json::parse(blob);
    return j.get<Metadata>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad metadata: ") + e.what());
  }
}

inline void write_name_shape(ByteWriter& w, const std::string& name, const Shape& shape) {
  w.u8(static_cast<std::uint8_t>(name.size()));
  w.raw(name);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) w.u32(d);
}

inline void read_name_shape(ByteReader& r, std::string& name, Shape& shape) {
  name = r.str(r.u8());
  shape.resize(r.u8());
  for (auto& d : shape) d = r.u32();
}

// Tensor records shared by JSQW and the exempt section of JSQQ.
inline void write_tensor_records(ByteWriter& w, const std::vector<WeightTensor>& tensors,
                                 int width_bits) {
  for (const auto& t : tensors) {
    write_name_shape(w, t.name, t.shape);
    w.u8(t.cell_index ? 1 : 0);
    w.u16(t.cell_index.value_or(0));
    for (double v : t.values) w.real(v, width_bits);
  }
}

inline std::vector<WeightTensor> read_tensor_records(ByteReader& r, std::size_t count,
                                                     int width_bits) {
  std::vector<WeightTensor> out(count);
  for (auto& t : out) {
    read_name_shape(r, t.name, t.shape);
    const bool has_cell = r.u8() != 0;
    const auto cell = r.u16();
    if (has_cell) t.cell_index = cell;
    const std::size_t n = shape_product(t.shape);
    const std::size_t bytes_needed = n * static_cast<std::size_t>(width_bits / 8);
    if (r.remaining() < bytes_needed) throw FormatError("truncated stream");
    t.values.resize(n);
    for (auto& v : t.values) {
      v = r.real(width_bits);
      if (!std::isfinite(v)) throw FormatError("non-finite value in " + t.name);
    }
  }
  return out;
}

inline void check_magic(ByteReader& r, std::string_view magic) {
  if (r.remaining() < magic.size() || r.str(magic.size()) != magic)
    throw FormatError("bad magic");
  if (r.u16() != kFormatVersion) throw FormatError("version mismatch");
}

}  // namespace detail

inline Bytes save_float_model(const FloatModel& m) {
  validate(m);
  ByteWriter w;
  w.raw(std::string_view("JSQW"));
  w.u16(kFormatVersion);
  w.u16(static_cast<std::uint16_t>(m.float_width_bits));
  w.u16(static_cast<std::uint16_t>(m.tensors.size()));
  detail::write_tensor_records(w, m.tensors, m.float_width_bits);
  detail::write_metadata(w, m.metadata);
  return std::move(w).bytes();
}

// Writes the JSQW container to `sink`; returns the number of bytes written.
inline std::size_t save_float_model(const FloatModel& m, std::ostream& sink) {
  const Bytes bytes = save_float_model(m);
  sink.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw IoError("sink write failure");
  return bytes.size();
}

inline FloatModel load_float_model(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  detail::check_magic(r, "JSQW");
  FloatModel m;
  m.float_width_bits = r.u16();
  if (m.float_width_bits != 16 && m.float_width_bits != 32 && m.float_width_bits != 64)
    throw FormatError("bad float width");
  const auto count = r.u16();
  m.tensors = detail::read_tensor_records(r, count, m.float_width_bits);
  m.metadata = detail::read_metadata(r);
  if (r.remaining() != 0) throw FormatError("trailing bytes");
  try {
    validate(m);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return m;
}

inline void save_float_model_file(const FloatModel& m, const std::string& path) {
  write_file(path, save_float_model(m));
}

inline FloatModel load_float_model_file(const std::string& path) {
  return load_float_model(read_file(path));
}

}  // namespace evoquant
