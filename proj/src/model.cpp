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

#include "sbnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sbnn::model {

double BatchNorm::apply(std::size_t ch, double z) const {
  const double inv_std = 1.0 / std::sqrt(var[ch] + eps);
  return gamma[ch] * ((z - mean[ch]) * inv_std) + beta[ch];
}

bool activate_sign(Activation act, const BatchNorm& bn, std::size_t ch, double z) {
  switch (act) {
    case Activation::BatchNormSign: return bn.apply(ch, z) >= 0.0;
    case Activation::Sign:
    case Activation::None: return z >= 0.0;
  }
  return z >= 0.0;
}

std::size_t input_size(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, FloatConv> || std::is_same_v<T, BinaryConv>) {
          return l.geom.input_shape().size();
        } else if constexpr (std::is_same_v<T, MaxPool>) {
          return l.input_shape().size();
        } else {
          return static_cast<std::size_t>(l.geom.in_features);
        }
      },
      layer);
}

std::size_t output_size(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, FloatConv> || std::is_same_v<T, BinaryConv>) {
          return l.geom.output_shape().size();
        } else if constexpr (std::is_same_v<T, MaxPool>) {
          return l.output_shape().size();
        } else {
          return static_cast<std::size_t>(l.geom.out_features);
        }
      },
      layer);
}

std::size_t output_channels(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, FloatConv> || std::is_same_v<T, BinaryConv>) {
          return static_cast<std::size_t>(l.geom.out_channels);
        } else if constexpr (std::is_same_v<T, MaxPool>) {
          return static_cast<std::size_t>(l.channels);
        } else {
          return static_cast<std::size_t>(l.geom.out_features);
        }
      },
      layer);
}

Activation activation_of(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> Activation {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, MaxPool>) {
          return Activation::Sign;
        } else {
          return l.act;
        }
      },
      layer);
}

bool is_binary(const Layer& layer) {
  return std::holds_alternative<BinaryConv>(layer) || std::holds_alternative<BinaryLinear>(layer);
}

namespace {

void require(bool cond, std::size_t index, const std::string& what) {
  if (!cond) throw ValidationError("layer " + std::to_string(index) + ": " + what);
}

void check_bn(const BatchNorm& bn, Activation act, std::size_t channels, std::size_t index) {
  if (act != Activation::BatchNormSign) {
    require(bn.mean.empty() && bn.var.empty() && bn.gamma.empty() && bn.beta.empty(), index,
            "batchnorm parameters without a batchnorm activation");
    return;
  }
  require(bn.mean.size() == channels && bn.var.size() == channels &&
              bn.gamma.size() == channels && bn.beta.size() == channels,
          index, "batchnorm size does not match channel count");
  require(bn.eps > 0.0, index, "batchnorm eps must be positive");
  for (std::size_t c = 0; c < channels; ++c) {
    require(std::isfinite(bn.mean[c]) && std::isfinite(bn.var[c]) && bn.var[c] >= 0.0 &&
                std::isfinite(bn.gamma[c]) && std::isfinite(bn.beta[c]),
            index, "batchnorm parameters must be finite with var >= 0");
  }
}

void check_geometry(const ConvGeometry& g, std::size_t index) {
  require(g.in_channels > 0 && g.out_channels > 0 && g.stride > 0 && g.padding >= 0, index,
          "bad convolution geometry");
  require(g.in_height + 2 * g.padding >= 3 && g.in_width + 2 * g.padding >= 3, index,
          "input smaller than the 3x3 window");
}

void check_omega(const binquant::OmegaParams& omega, std::size_t index) {
  require(std::isfinite(omega.tau) && std::isfinite(omega.phi) && omega.tau >= 0.0, index,
          "binarized domain must be finite with alpha <= beta");
}

void check_bits(const std::vector<std::uint8_t>& bits, std::size_t n, std::size_t index) {
  require(bits.size() == n, index, "weight bit count does not match geometry");
  require(std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b <= 1; }), index,
          "weight bits must be 0 or 1");
}

}  // namespace

void validate(const QuantizedModel& model) {
  bool signs_in = false;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (i > 0) {
      require(input_size(layer) == output_size(model.layers[i - 1]), i,
              "input size does not match previous layer output");
      if (is_binary(layer)) require(signs_in, i, "binarized layer needs +-1 inputs");
    }
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, FloatConv>) {
            check_geometry(l.geom, i);
            require(l.weights.size() == l.geom.weight_count(), i, "weight count mismatch");
            require(l.bias.size() == static_cast<std::size_t>(l.geom.out_channels), i,
                    "bias count mismatch");
            check_bn(l.bn, l.act, static_cast<std::size_t>(l.geom.out_channels), i);
          } else if constexpr (std::is_same_v<T, FloatLinear>) {
            require(l.geom.in_features > 0 && l.geom.out_features > 0, i, "bad linear geometry");
            require(l.weights.size() == l.geom.weight_count(), i, "weight count mismatch");
            require(l.bias.size() == static_cast<std::size_t>(l.geom.out_features), i,
                    "bias count mismatch");
            check_bn(l.bn, l.act, static_cast<std::size_t>(l.geom.out_features), i);
          } else if constexpr (std::is_same_v<T, BinaryConv>) {
            check_geometry(l.geom, i);
            check_omega(l.omega, i);
            check_bits(l.bits, l.geom.weight_count(), i);
            check_bn(l.bn, l.act, static_cast<std::size_t>(l.geom.out_channels), i);
          } else if constexpr (std::is_same_v<T, BinaryLinear>) {
            require(l.geom.in_features > 0 && l.geom.out_features > 0, i, "bad linear geometry");
            check_omega(l.omega, i);
            check_bits(l.bits, l.geom.weight_count(), i);
            check_bn(l.bn, l.act, static_cast<std::size_t>(l.geom.out_features), i);
          } else {
            require(l.channels > 0 && l.in_height >= 2 && l.in_width >= 2, i,
                    "bad pooling geometry");
          }
        },
        layer);
    if (!std::holds_alternative<MaxPool>(layer)) signs_in = activation_of(layer) != Activation::None;
  }
}

void float_conv_preact(const FloatConv& layer, std::span<const double> in,
                       std::span<double> out) {
  const ConvGeometry& g = layer.geom;
  const int oh = g.out_height();
  const int ow = g.out_width();
  for (int o = 0; o < g.out_channels; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = layer.bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < g.in_channels; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy * g.stride + ky - g.padding;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox * g.stride + kx - g.padding;
              if (ix < 0 || ix >= g.in_width) continue;
              const std::size_t wi = ((static_cast<std::size_t>(o) * g.in_channels + c) * 3 + ky) * 3 + kx;
              const std::size_t xi = (static_cast<std::size_t>(c) * g.in_height + iy) * g.in_width + ix;
              acc += layer.weights[wi] * in[xi];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void float_linear_preact(const FloatLinear& layer, std::span<const double> in,
                         std::span<double> out) {
  const auto n_in = static_cast<std::size_t>(layer.geom.in_features);
  for (std::size_t o = 0; o < static_cast<std::size_t>(layer.geom.out_features); ++o) {
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += layer.weights[o * n_in + i] * in[i];
    out[o] = acc;
  }
}

void apply_activation(Activation act, const BatchNorm& bn, std::size_t per_channel,
                      std::span<double> values) {
  if (act == Activation::None) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = activate_sign(act, bn, i / per_channel, values[i]) ? 1.0 : -1.0;
  }
}

void max_pool(const MaxPool& layer, std::span<const double> in, std::span<double> out) {
  const int oh = layer.in_height / 2;
  const int ow = layer.in_width / 2;
  for (int c = 0; c < layer.channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double m = in[(static_cast<std::size_t>(c) * layer.in_height + 2 * oy) * layer.in_width + 2 * ox];
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            m = std::max(m, in[(static_cast<std::size_t>(c) * layer.in_height + 2 * oy + dy) *
                                   layer.in_width + 2 * ox + dx]);
          }
        }
        out[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = m;
      }
    }
  }
}

}  // namespace sbnn::model
