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

// Canonical Huffman coding of quantization codes.
//
// A codebook is fully described by its per-symbol code lengths (0 = symbol
// absent). Codes are assigned canonically: symbols sorted by (length, symbol
// index) receive consecutive code values, left-shifted whenever the length
// grows. Bits are packed most-significant-bit first.

#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include "evoquant/error.hpp"

namespace evoquant {

inline constexpr int kMaxCodeLength = 64;

class Codebook {
 public:
  Codebook() = default;

  // Builds the canonical code for the given lengths. Throws if the lengths
  // violate Kraft's inequality or no symbol is present.
  static Codebook from_lengths(std::vector<std::uint8_t> lengths) {
    Codebook book;
    book.lengths_ = std::move(lengths);
    book.assign_codes();
    return book;
  }

  std::size_t symbol_count() const { return lengths_.size(); }
  const std::vector<std::uint8_t>& code_lengths() const { return lengths_; }
  int length(std::uint32_t symbol) const { return lengths_[symbol]; }
  std::uint64_t code(std::uint32_t symbol) const { return codes_[symbol]; }
  int max_length() const { return max_length_; }

  // Cost in bits of coding symbols with the given frequencies.
  std::uint64_t cost(std::span<const std::uint64_t> frequencies) const {
    std::uint64_t bits = 0;
    for (std::size_t s = 0; s < frequencies.size() && s < lengths_.size(); ++s)
      bits += frequencies[s] * lengths_[s];
    return bits;
  }

  bool operator==(const Codebook& other) const { return lengths_ == other.lengths_; }

 private:
  friend std::vector<std::uint32_t> decode_symbols(std::span<const std::uint8_t>, std::uint64_t,
                                                   const Codebook&, std::size_t);

  void assign_codes() {
    codes_.assign(lengths_.size(), 0);
    sorted_.clear();
    max_length_ = 0;
    for (std::uint32_t s = 0; s < lengths_.size(); ++s) {
      if (lengths_[s] == 0) continue;
      if (lengths_[s] > kMaxCodeLength) throw FormatError("code length too large");
      sorted_.push_back(s);
      max_length_ = std::max<int>(max_length_, lengths_[s]);
    }
    if (sorted_.empty()) throw InvalidArgument("codebook has no symbols");
    std::stable_sort(sorted_.begin(), sorted_.end(), [&](std::uint32_t a, std::uint32_t b) {
      return lengths_[a] < lengths_[b];
    });
    // Kraft sum scaled by 2^max_length must not exceed 2^max_length.
    long double kraft = 0.0L;
    for (auto s : sorted_) kraft += std::ldexp(1.0L, -lengths_[s]);
    if (kraft > 1.0L) throw FormatError("code lengths violate Kraft inequality");

    count_.assign(max_length_ + 1, 0);
    first_code_.assign(max_length_ + 1, 0);
    first_index_.assign(max_length_ + 1, 0);
    std::uint64_t code = 0;
    int len = lengths_[sorted_.front()];
    for (std::size_t i = 0; i < sorted_.size(); ++i) {
      const auto s = sorted_[i];
      if (lengths_[s] != len) {
        code <<= (lengths_[s] - len);
        len = lengths_[s];
      }
      if (count_[len] == 0) {
        first_code_[len] = code;
        first_index_[len] = i;
      }
      ++count_[len];
      codes_[s] = code++;
    }
  }

  std::vector<std::uint8_t> lengths_;
  std::vector<std::uint64_t> codes_;
  std::vector<std::uint32_t> sorted_;  // symbols in canonical order
  std::vector<std::uint64_t> count_;
  std::vector<std::uint64_t> first_code_;
  std::vector<std::size_t> first_index_;
  int max_length_ = 0;
};

struct EncodedStream {
  std::uint64_t bit_count = 0;
  std::vector<std::uint8_t> payload;
  bool operator==(const EncodedStream&) const = default;
};

// Optimal prefix-code lengths for `frequencies` (Huffman), canonicalized.
// A lone present symbol gets length 1.
inline Codebook build_codebook(std::span<const std::uint64_t> frequencies) {
  struct Node {
    std::uint64_t weight;
    std::uint64_t order;  // deterministic tie-break
    int parent = -1;
  };
  std::vector<Node> nodes;
  std::vector<std::uint8_t> lengths(frequencies.size(), 0);
  std::vector<int> leaf_of(frequencies.size(), -1);
  for (std::size_t s = 0; s < frequencies.size(); ++s) {
    if (frequencies[s] == 0) continue;
    leaf_of[s] = static_cast<int>(nodes.size());
    nodes.push_back({frequencies[s], s});
  }
  if (nodes.empty()) throw InvalidArgument("all-zero frequencies");
  if (nodes.size() == 1) {
    for (std::size_t s = 0; s < frequencies.size(); ++s)
      if (leaf_of[s] >= 0) lengths[s] = 1;
    return Codebook::from_lengths(std::move(lengths));
  }

  auto greater = [&](int a, int b) {
    if (nodes[a].weight != nodes[b].weight) return nodes[a].weight > nodes[b].weight;
    return nodes[a].order > nodes[b].order;
  };
  std::priority_queue<int, std::vector<int>, decltype(greater)> heap(greater);
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) heap.push(i);
  std::uint64_t next_order = frequencies.size();
  while (heap.size() > 1) {
    const int a = heap.top();
    heap.pop();
    const int b = heap.top();
    heap.pop();
    nodes.push_back({nodes[a].weight + nodes[b].weight, next_order++});
    const int parent = static_cast<int>(nodes.size()) - 1;
    nodes[a].parent = parent;
    nodes[b].parent = parent;
    heap.push(parent);
  }
  for (std::size_t s = 0; s < frequencies.size(); ++s) {
    if (leaf_of[s] < 0) continue;
    int depth = 0;
    for (int n = leaf_of[s]; nodes[n].parent >= 0; n = nodes[n].parent) ++depth;
    if (depth > kMaxCodeLength) throw InvalidArgument("code length exceeds 64 bits");
    lengths[s] = static_cast<std::uint8_t>(depth);
  }
  return Codebook::from_lengths(std::move(lengths));
}

inline EncodedStream encode(std::span<const std::uint32_t> symbols, const Codebook& book) {
  EncodedStream out;
  std::uint8_t acc = 0;
  int filled = 0;
  for (auto s : symbols) {
    if (s >= book.symbol_count() || book.length(s) == 0)
      throw InvalidArgument("symbol absent from codebook");
    const int len = book.length(s);
    const std::uint64_t code = book.code(s);
    for (int i = len - 1; i >= 0; --i) {
      acc = static_cast<std::uint8_t>((acc << 1) | ((code >> i) & 1u));
      if (++filled == 8) {
        out.payload.push_back(acc);
        acc = 0;
        filled = 0;
      }
    }
    out.bit_count += static_cast<std::uint64_t>(len);
  }
  if (filled > 0) out.payload.push_back(static_cast<std::uint8_t>(acc << (8 - filled)));
  return out;
}

inline std::vector<std::uint32_t> decode_symbols(std::span<const std::uint8_t> payload,
                                                 std::uint64_t bit_count, const Codebook& book,
                                                 std::size_t count) {
  std::vector<std::uint32_t> out;
  if (count == 0) return out;
  if (payload.size() < (bit_count + 7) / 8) throw FormatError("stream exhausted");
  out.reserve(count);
  std::uint64_t pos = 0;
  while (out.size() < count) {
    std::uint64_t code = 0;
    int len = 0;
    for (;;) {
      if (pos >= bit_count) throw FormatError("stream exhausted");
      const unsigned bit = (payload[pos >> 3] >> (7 - (pos & 7))) & 1u;
      ++pos;
      code = (code << 1) | bit;
      ++len;
      if (book.count_[len] != 0 && code >= book.first_code_[len] &&
          code - book.first_code_[len] < book.count_[len]) {
        out.push_back(book.sorted_[book.first_index_[len] + (code - book.first_code_[len])]);
        break;
      }
      if (len == book.max_length_) throw FormatError("invalid prefix");
    }
  }
  if (pos != bit_count) throw FormatError("trailing bits in stream");
  return out;
}

inline std::vector<std::uint32_t> decode(const EncodedStream& stream, const Codebook& book,
                                         std::size_t count) {
  return decode_symbols(stream.payload, stream.bit_count, book, count);
}

// Histogram of `symbols` over an alphabet of `alphabet_size` symbols.
inline std::vector<std::uint64_t> symbol_frequencies(std::span<const std::uint32_t> symbols,
                                                     std::size_t alphabet_size) {
  std::vector<std::uint64_t> freq(alphabet_size, 0);
  for (auto s : symbols) {
    if (s >= alphabet_size) throw InvalidArgument("symbol outside alphabet");
    ++freq[s];
  }
  return freq;
}

}  // namespace evoquant
