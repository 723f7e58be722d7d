/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sbnn/common.hpp"

namespace sbnn {

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

/// Bit i lives in word i / 64 at position i % 64. Bits past size() are zero.
class PackedBits {
 public:
  PackedBits() = default;
  explicit PackedBits(std::size_t length) : words_(words_for(length), 0), size_(length) {}

  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] std::span<const Word> words() const { return words_; }

  [[nodiscard]] bool get(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
  void set(std::size_t i, bool v) {
    const Word mask = Word{1} << (i % kWordBits);
    if (v) {
      words_[i / kWordBits] |= mask;
    } else {
      words_[i / kWordBits] &= ~mask;
    }
  }

  [[nodiscard]] std::size_t popcount() const {
    std::size_t n = 0;
    for (Word w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  [[nodiscard]] ZeroOneWeights unpack() const;

  friend bool operator==(const PackedBits&, const PackedBits&) = default;

 private:
  std::vector<Word> words_;
  std::size_t size_ = 0;
};

/// Row-major bit matrix; each row starts on a word boundary and its padding is zero.
class PackedRows {
 public:
  PackedRows() = default;
  PackedRows(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_(words_for(cols)), words_(rows * stride_, 0) {}

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] std::span<const Word> row(std::size_t r) const {
    return {words_.data() + r * stride_, stride_};
  }
  void set(std::size_t r, std::size_t c, bool v) {
    Word& w = words_[r * stride_ + c / kWordBits];
    const Word mask = Word{1} << (c % kWordBits);
    w = v ? (w | mask) : (w & ~mask);
  }
  [[nodiscard]] bool get(std::size_t r, std::size_t c) const {
    return (words_[r * stride_ + c / kWordBits] >> (c % kWordBits)) & 1U;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t stride_ = 0;
  std::vector<Word> words_;
};

PackedBits pack(const ZeroOneWeights& bits);

/// Activation encoding: +1 -> 1, -1 -> 0.
PackedBits pack_signs(const SignWeights& signs);

inline std::size_t popcount(std::span<const Word> words) {
  std::size_t n = 0;
  for (Word w : words) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

/// Sum of the +-1 activations selected by the 1-bits of the weights:
/// 2 * popcount(x & w) - popcount(w).
inline std::int64_t popcount_dot(std::span<const Word> x, std::span<const Word> w) {
  std::int64_t both = 0;
  std::int64_t ones = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    both += std::popcount(x[i] & w[i]);
    ones += std::popcount(w[i]);
  }
  return 2 * both - ones;
}

std::int64_t popcount_dot(const PackedBits& x, const PackedBits& w);

/// Sum of the +-1 activations: 2 * popcount(x) - |x|.
inline std::int64_t q_compute(const PackedBits& x) {
  return 2 * static_cast<std::int64_t>(x.popcount()) - static_cast<std::int64_t>(x.size());
}

}  // namespace sbnn
