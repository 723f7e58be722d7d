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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sbnn {

/// Rows are samples, columns are the flattened (channel, row, col) features.
template <typename Scalar>
using BatchT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Batch = BatchT<double>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealWeights = Eigen::VectorXd;
/// Entries are exactly -1 or +1.
using SignWeights = VectorT<std::int8_t>;
/// Entries are exactly 0 or 1.
using ZeroOneWeights = VectorT<std::uint8_t>;

struct FeatureShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Shapes of operands do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbnn
