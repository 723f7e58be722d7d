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
#include <span>
#include <variant>
#include <vector>

#include "sbnn/binquant.hpp"
#include "sbnn/common.hpp"

/// Quantized inference model: a chain of layers where binarized layers carry
/// {0,1} weights plus their {alpha, beta} domain, and first/last layers stay
/// real-valued.
namespace sbnn::model {

/// What follows a layer's pre-activation.
enum class Activation : std::uint8_t {
  None = 0,           // real output (logits)
  Sign = 1,           // sign(z), ties to +1
  BatchNormSign = 2,  // sign(batchnorm(z)), ties to +1
};

struct BatchNorm {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> gamma;
  std::vector<double> beta;
  double eps = 1e-5;

  [[nodiscard]] std::size_t channels() const { return mean.size(); }
  [[nodiscard]] double apply(std::size_t ch, double z) const;

  friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

/// The one sign decision used by every evaluator of a model.
bool activate_sign(Activation act, const BatchNorm& bn, std::size_t ch, double z);

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int stride = 1;
  int padding = 0;

  [[nodiscard]] int out_height() const { return (in_height + 2 * padding - 3) / stride + 1; }
  [[nodiscard]] int out_width() const { return (in_width + 2 * padding - 3) / stride + 1; }
  [[nodiscard]] std::size_t fan_in() const { return static_cast<std::size_t>(in_channels) * 9; }
  [[nodiscard]] std::size_t kernel_count() const {
    return static_cast<std::size_t>(in_channels) * out_channels;
  }
  [[nodiscard]] std::size_t weight_count() const { return kernel_count() * 9; }
  [[nodiscard]] std::size_t positions() const {
    return static_cast<std::size_t>(out_height()) * out_width();
  }
  [[nodiscard]] FeatureShape input_shape() const { return {in_channels, in_height, in_width}; }
  [[nodiscard]] FeatureShape output_shape() const {
    return {out_channels, out_height(), out_width()};
  }

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

struct LinearGeometry {
  int in_features = 0;
  int out_features = 0;

  [[nodiscard]] std::size_t weight_count() const {
    return static_cast<std::size_t>(in_features) * out_features;
  }
  friend bool operator==(const LinearGeometry&, const LinearGeometry&) = default;
};

/// Zero-padded real convolution. Weights are [out][in][3][3].
struct FloatConv {
  ConvGeometry geom;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation act = Activation::None;
  BatchNorm bn;

  friend bool operator==(const FloatConv&, const FloatConv&) = default;
};

/// Weights are [out][in].
struct FloatLinear {
  LinearGeometry geom;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation act = Activation::None;
  BatchNorm bn;

  friend bool operator==(const FloatLinear&, const FloatLinear&) = default;
};

/// Binarized convolution over +-1 inputs. The padding halo reads as -1.
struct BinaryConv {
  ConvGeometry geom;
  binquant::OmegaParams omega;
  std::vector<std::uint8_t> bits;  // [out][in][3][3]
  Activation act = Activation::BatchNormSign;
  BatchNorm bn;

  friend bool operator==(const BinaryConv&, const BinaryConv&) = default;
};

struct BinaryLinear {
  LinearGeometry geom;
  binquant::OmegaParams omega;
  std::vector<std::uint8_t> bits;  // [out][in]
  Activation act = Activation::BatchNormSign;
  BatchNorm bn;

  friend bool operator==(const BinaryLinear&, const BinaryLinear&) = default;
};

/// 2x2 max pooling, stride 2, floor division of the spatial size.
struct MaxPool {
  int channels = 0;
  int in_height = 0;
  int in_width = 0;

  [[nodiscard]] FeatureShape input_shape() const { return {channels, in_height, in_width}; }
  [[nodiscard]] FeatureShape output_shape() const {
    return {channels, in_height / 2, in_width / 2};
  }
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

using Layer = std::variant<FloatConv, FloatLinear, BinaryConv, BinaryLinear, MaxPool>;

struct QuantizedModel {
  std::vector<Layer> layers;

  friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

std::size_t input_size(const Layer& layer);
std::size_t output_size(const Layer& layer);
Activation activation_of(const Layer& layer);
bool is_binary(const Layer& layer);
std::size_t output_channels(const Layer& layer);

/// Checks sizes chain, buffers agree with geometries, binarized layers receive
/// +-1 activations, and binarized domains are canonical. Throws ValidationError.
void validate(const QuantizedModel& model);

/// Pre-activations of a real convolution in plain loop order.
void float_conv_preact(const FloatConv& layer, std::span<const double> in, std::span<double> out);
void float_linear_preact(const FloatLinear& layer, std::span<const double> in,
                         std::span<double> out);

/// Applies the layer's activation in place: values become +-1 unless None.
/// `per_channel` is the number of consecutive values sharing one channel.
void apply_activation(Activation act, const BatchNorm& bn, std::size_t per_channel,
                      std::span<double> values);

void max_pool(const MaxPool& layer, std::span<const double> in, std::span<double> out);

}  // namespace sbnn::model
