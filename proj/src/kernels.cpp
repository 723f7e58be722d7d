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

#include "sbnn/kernels.hpp"

#include <string>

namespace sbnn {

KernelCensus classify_kernels(std::span<const std::uint8_t> bits) {
  if (bits.size() % kKernelTaps != 0) {
    throw ShapeError("classify_kernels: " + std::to_string(bits.size()) +
                     " bits is not a whole number of 3x3 kernels");
  }
  KernelCensus census;
  const std::size_t count = bits.size() / kKernelTaps;
  census.classes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint16_t pattern = 0;
    for (int t = 0; t < kKernelTaps; ++t) {
      if (bits[k * kKernelTaps + t]) pattern |= static_cast<std::uint16_t>(1U << t);
    }
    const KernelClass c = classify_kernel(pattern);
    switch (c.tag) {
      case KernelClass::Tag::Zero: ++census.zero; break;
      case KernelClass::Tag::Single: ++census.single; break;
      case KernelClass::Tag::Dense: ++census.dense; break;
    }
    census.classes.push_back(c);
  }
  return census;
}

std::vector<std::size_t> hamming_counts(const KernelCensus& census) {
  std::vector<std::size_t> counts(kKernelTaps + 1, 0);
  for (const auto& c : census.classes) ++counts[static_cast<std::size_t>(c.hamming_weight())];
  return counts;
}

}  // namespace sbnn
