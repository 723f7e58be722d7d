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

#include "sbnn/bits.hpp"

namespace sbnn {

ZeroOneWeights PackedBits::unpack() const {
  ZeroOneWeights out(static_cast<Eigen::Index>(size_));
  for (std::size_t i = 0; i < size_; ++i) out[static_cast<Eigen::Index>(i)] = get(i) ? 1 : 0;
  return out;
}

PackedBits pack(const ZeroOneWeights& bits) {
  PackedBits out(static_cast<std::size_t>(bits.size()));
  for (Eigen::Index i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw ValidationError("pack: entry is not 0 or 1");
    if (bits[i]) out.set(static_cast<std::size_t>(i), true);
  }
  return out;
}

PackedBits pack_signs(const SignWeights& signs) {
  PackedBits out(static_cast<std::size_t>(signs.size()));
  for (Eigen::Index i = 0; i < signs.size(); ++i) {
    if (signs[i] != 1 && signs[i] != -1) throw ValidationError("pack_signs: entry is not +-1");
    if (signs[i] > 0) out.set(static_cast<std::size_t>(i), true);
  }
  return out;
}

std::int64_t popcount_dot(const PackedBits& x, const PackedBits& w) {
  if (x.size() != w.size()) throw ShapeError("popcount_dot: length mismatch");
  return popcount_dot(x.words(), w.words());
}

}  // namespace sbnn
