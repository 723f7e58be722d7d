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

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "sbnn/common.hpp"

namespace sbnn::dataio {

class DataError : public Error {
 public:
  enum class Kind { Io, SizeMismatch, LabelOutOfRange, BadMagic, CountMismatch };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Dataset {
  Batch images;             // one normalized image per row, channel-major
  std::vector<int> labels;
  int classes = 0;
  FeatureShape shape;
  std::vector<double> mean;    // per channel, on the [0, 1] pixel scale
  std::vector<double> stddev;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  /// Rows [begin, end) as a new dataset.
  [[nodiscard]] Dataset slice(std::size_t begin, std::size_t end) const;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::array<double, 3> kCifar10Mean{0.4914, 0.4822, 0.4465};
inline constexpr std::array<double, 3> kCifar10Std{0.2470, 0.2435, 0.2616};

/// CIFAR-10 binary batch: records of 1 label byte + 3072 pixel bytes.
Dataset load_cifar10_binary(const std::filesystem::path& path);

struct CifarRecord {
  std::uint8_t label = 0;
  std::array<std::uint8_t, 3072> pixels{};
};
void write_cifar10_binary(const std::filesystem::path& path, std::span<const CifarRecord> records);

/// IDX image file (magic 0x00000803) and label file (magic 0x00000801).
/// Pixels are scaled to [0, 1] and standardized with the file's own statistics.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Deterministic Gaussian blobs: each class has a random +-1 prototype image and
/// samples add N(0, sigma^2) noise with sigma = 0.5 + 2 * difficulty.
Dataset synthetic_classification(std::uint64_t seed, std::size_t n, int classes,
                                 double difficulty, FeatureShape shape = {3, 8, 8});

/// Random horizontal flip and a +-1 pixel shift with zero fill.
void augment(Batch& images, const FeatureShape& shape, std::mt19937_64& rng);

}  // namespace sbnn::dataio
