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

// Quantized models and the JSQQ file format.
//
// JSQQ layout (all integers little-endian):
//
//   "JSQQ" | u16 version (=1) | u16 quantized tensor count
//   per quantized tensor:
//     u8 name length | name | u8 rank | rank x u32 dims
//     u8 has_cell_index | u16 cell index
//     u8 bit_width | u32 bucket_size | u32 bucket count
//     bucket count x (f32 mu, f32 nu)
//     u32 alphabet size | alphabet size x u8 code length
//     u64 encoded bit count | ceil(bit count / 8) payload bytes
//   exempt section: u16 float_width_bits | u16 count | JSQW tensor records
//   u32 metadata length | metadata JSON object
//
// The reported model size is the total file size in bytes.

#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evoquant/binary_io.hpp"
#include "evoquant/error.hpp"
#include "evoquant/huffman.hpp"
#include "evoquant/quantizer.hpp"
#include "evoquant/tensor_model.hpp"

namespace evoquant {

// The serialized codebook stores one length byte per symbol, so the
// container accepts at most 16-bit codes (65537 symbols).
inline constexpr int kMaxSerializableBits = 16;

struct QuantizedModel {
  std::vector<QuantizedTensor> tensors;
  std::vector<WeightTensor> exempt_tensors;
  Metadata metadata;
  int float_width_bits = 32;  // storage width of exempt tensors and scales' reference f
  std::uint64_t total_bits = 0;

  bool operator==(const QuantizedModel&) const = default;
};

// Which tensors stay at full precision. Tensors without a cell index are
// always exempt.
struct Exemptions {
  std::set<std::string> names;
  std::set<std::uint16_t> cells;

  bool exempt(const WeightTensor& t) const {
    return !t.cell_index || names.contains(t.name) || cells.contains(*t.cell_index);
  }
};

// Builds the canonical Huffman code for the tensor's codes and stores the
// encoded stream in qt.codec_payload.
inline void entropy_encode(QuantizedTensor& qt) {
  const auto freq = symbol_frequencies(qt.codes, qt.bit_width.alphabet_size());
  if (qt.codes.empty()) throw InvalidArgument("empty tensor " + qt.name);
  CodedPayload payload;
  payload.book = build_codebook(freq);
  payload.stream = encode(qt.codes, payload.book);
  qt.codec_payload = std::move(payload);
}

// Payload bits: coded symbols + 2 x 32-bit scales per bucket for quantized
// tensors, f bits per value for exempt tensors. Headers and codebooks are
// not counted.
inline std::uint64_t payload_bits(const QuantizedModel& qm) {
  std::uint64_t bits = 0;
  for (const auto& qt : qm.tensors) {
    if (!qt.codec_payload) throw InvalidArgument("tensor not entropy-encoded: " + qt.name);
    bits += qt.codec_payload->stream.bit_count + 64u * qt.bucket_count();
  }
  for (const auto& t : qm.exempt_tensors)
    bits += static_cast<std::uint64_t>(qm.float_width_bits) * t.size();
  return bits;
}

inline void validate(const QuantizedModel& qm) {
  require(!qm.tensors.empty() || !qm.exempt_tensors.empty(), "empty model");
  require(qm.tensors.size() <= kMaxTensorCount && qm.exempt_tensors.size() <= kMaxTensorCount,
          "too many tensors");
  std::set<std::string> names;
  for (const auto& qt : qm.tensors) {
    validate(qt);
    require(!qt.name.empty() && qt.name.size() <= kMaxNameLength, "bad tensor name");
    require(qt.bit_width.bits() <= kMaxSerializableBits,
            "bit width above 16 is not serializable: " + qt.name);
    require(names.insert(qt.name).second, "duplicate tensor name: " + qt.name);
  }
  for (const auto& t : qm.exempt_tensors) {
    validate_tensor(t);
    require(names.insert(t.name).second, "tensor both quantized and exempt: " + t.name);
  }
}

// Quantizes every tagged, non-exempt tensor of `model` with the bit width of
// its cell. `policy_bits[j]` is the bit width for cell j.
inline QuantizedModel quantize_model(const FloatModel& model, std::span<const int> policy_bits,
                                     std::size_t bucket_size = kDefaultBucketSize,
                                     const Exemptions& exemptions = {}) {
  validate(model);
  if (policy_bits.size() != model.cell_count()) throw InvalidArgument("policy length mismatch");
  QuantizedModel qm;
  qm.metadata = model.metadata;
  qm.float_width_bits = model.float_width_bits;
  for (const auto& t : model.tensors) {
    if (exemptions.exempt(t)) {
      qm.exempt_tensors.push_back(t);
      continue;
    }
    auto qt = quantize_tensor(t, BitWidth(policy_bits[*t.cell_index]), bucket_size);
    entropy_encode(qt);
    qm.tensors.push_back(std::move(qt));
  }
  qm.total_bits = payload_bits(qm);
  return qm;
}

// Expands a quantized model back to floats. Quantized tensors come first, then
// exempt tensors, each group in stored order.
inline FloatModel dequantize_model(const QuantizedModel& qm, int float_width_bits = 64) {
  FloatModel out;
  out.metadata = qm.metadata;
  out.float_width_bits = float_width_bits;
  for (const auto& qt : qm.tensors) out.tensors.push_back(dequantize_tensor(qt));
  for (const auto& t : qm.exempt_tensors) out.tensors.push_back(t);
  round_values(out);
  return out;
}

inline Bytes save_quantized_model(const QuantizedModel& qm) {
  validate(qm);
  ByteWriter w;
  w.raw(std::string_view("JSQQ"));
  w.u16(kFormatVersion);
  w.u16(static_cast<std::uint16_t>(qm.tensors.size()));
  for (const auto& qt : qm.tensors) {
    QuantizedTensor coded = qt;
    if (!coded.codec_payload) entropy_encode(coded);
    const auto& payload = *coded.codec_payload;
    detail::write_name_shape(w, qt.name, qt.shape);
    w.u8(qt.cell_index ? 1 : 0);
    w.u16(qt.cell_index.value_or(0));
    w.u8(static_cast<std::uint8_t>(qt.bit_width.bits()));
    w.u32(static_cast<std::uint32_t>(qt.bucket_size));
    w.u32(static_cast<std::uint32_t>(qt.scales.size()));
    for (const auto& s : qt.scales) {
      w.f32(static_cast<float>(s.mu));
      w.f32(static_cast<float>(s.nu));
    }
    const auto& lengths = payload.book.code_lengths();
    w.u32(static_cast<std::uint32_t>(lengths.size()));
    w.raw(lengths);
    w.u64(payload.stream.bit_count);
    w.raw(payload.stream.payload);
  }
  w.u16(static_cast<std::uint16_t>(qm.float_width_bits));
  w.u16(static_cast<std::uint16_t>(qm.exempt_tensors.size()));
  detail::write_tensor_records(w, qm.exempt_tensors, qm.float_width_bits);
  detail::write_metadata(w, qm.metadata);
  return std::move(w).bytes();
}

inline QuantizedModel load_quantized_model(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  detail::check_magic(r, "JSQQ");
  QuantizedModel qm;
  const auto count = r.u16();
  qm.tensors.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    QuantizedTensor qt;
    detail::read_name_shape(r, qt.name, qt.shape);
    const bool has_cell = r.u8() != 0;
    const auto cell = r.u16();
    if (has_cell) qt.cell_index = cell;
    const int bits = r.u8();
    if (bits < 1 || bits > kMaxSerializableBits) throw FormatError("bad bit width");
    qt.bit_width = BitWidth(bits);
    qt.bucket_size = r.u32();
    if (qt.bucket_size < 2) throw FormatError("bad bucket size");
    const auto buckets = r.u32();
    const std::size_t n = shape_product(qt.shape);
    if (buckets != (n + qt.bucket_size - 1) / qt.bucket_size)
      throw FormatError("scale/bucket count mismatch");
    qt.scales.resize(buckets);
    for (auto& s : qt.scales) {
      s.mu = r.f32();
      s.nu = r.f32();
    }
    const auto alphabet = r.u32();
    if (alphabet != qt.bit_width.alphabet_size()) throw FormatError("bad alphabet size");
    auto lengths_span = r.raw(alphabet);
    CodedPayload payload;
    payload.book = Codebook::from_lengths({lengths_span.begin(), lengths_span.end()});
    payload.stream.bit_count = r.u64();
    auto bytes = r.raw((payload.stream.bit_count + 7) / 8);
    payload.stream.payload.assign(bytes.begin(), bytes.end());
    qt.codes = decode(payload.stream, payload.book, n);
    qt.codec_payload = std::move(payload);
    try {
      validate(qt);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());
    }
    qm.tensors.push_back(std::move(qt));
  }
  qm.float_width_bits = r.u16();
  if (qm.float_width_bits != 16 && qm.float_width_bits != 32 && qm.float_width_bits != 64)
    throw FormatError("bad float width");
  const auto exempt_count = r.u16();
  qm.exempt_tensors = detail::read_tensor_records(r, exempt_count, qm.float_width_bits);
  qm.metadata = detail::read_metadata(r);
  if (r.remaining() != 0) throw FormatError("trailing bytes");
  qm.total_bits = payload_bits(qm);
  return qm;
}

// Reported model size: total JSQQ file bytes.
inline std::size_t serialized_size(const QuantizedModel& qm) {
  return save_quantized_model(qm).size();
}

inline void save_quantized_model_file(const QuantizedModel& qm, const std::string& path) {
  write_file(path, save_quantized_model(qm));
}

inline QuantizedModel load_quantized_model_file(const std::string& path) {
  return load_quantized_model(read_file(path));
}

}  // namespace evoquant
