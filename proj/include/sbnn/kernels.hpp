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

inline constexpr int kKernelTaps = 9;
inline constexpr std::uint16_t kKernelMask = 0x1FF;

/// A 3x3 {0,1} kernel grouped by Hamming weight. Bit k of `pattern` is tap k
/// in row-major order (k = 3 * row + col).
struct KernelClass {
  enum class Tag : std::uint8_t { Zero = 0, Single = 1, Dense = 2 };

  Tag tag = Tag::Zero;
  std::uint16_t pattern = 0;

  [[nodiscard]] int hamming_weight() const { return std::popcount(pattern); }
  /// Tap index of the single 1-bit; only meaningful for Single.
  [[nodiscard]] int index() const { return std::countr_zero(pattern); }

  friend bool operator==(const KernelClass&, const KernelClass&) = default;
};

inline KernelClass classify_kernel(std::uint16_t pattern) {
  pattern &= kKernelMask;
  switch (std::popcount(pattern)) {
    case 0: return {KernelClass::Tag::Zero, pattern};
    case 1: return {KernelClass::Tag::Single, pattern};
    default: return {KernelClass::Tag::Dense, pattern};
  }
}

struct KernelCensus {
  std::vector<KernelClass> classes;
  std::size_t zero = 0;
  std::size_t single = 0;
  std::size_t dense = 0;

  [[nodiscard]] std::size_t total() const { return classes.size(); }
};

/// Groups consecutive runs of 9 bits into kernels. The bit count must be a
/// multiple of 9.
KernelCensus classify_kernels(std::span<const std::uint8_t> bits);

/// Histogram of kernel Hamming weights 0..9.
std::vector<std::size_t> hamming_counts(const KernelCensus& census);

}  // namespace sbnn
