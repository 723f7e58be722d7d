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

#include "sbnn/nn/quantize.hpp"

#include <string>

namespace sbnn::nn {

namespace {

binquant::OmegaParams domain_for(const WeightBlock& b, OmegaMode mode, const SignWeights& wb) {
  switch (mode) {
    case OmegaMode::Analytic: return binquant::fit_omega(b.latent(), wb).omega;
    case OmegaMode::Learned: return b.omega();
    case OmegaMode::FixedPM1: return binquant::OmegaParams::plus_minus_one();
  }
  return binquant::OmegaParams::plus_minus_one();
}

model::BatchNorm export_bn(const BatchNorm& bn) {
  model::BatchNorm out;
  const auto to_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  out.mean = to_vec(bn.running_mean);
  out.var = to_vec(bn.running_var);
  out.gamma = to_vec(bn.gamma);
  out.beta = to_vec(bn.beta);
  out.eps = bn.eps;
  return out;
}

}  // namespace

model::QuantizedModel quantize_snapshot(Network& net, OmegaMode mode) {
  model::QuantizedModel out;
  std::size_t i = 0;
  while (i < net.size()) {
    Layer& l = net.layer(i);
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (dynamic_cast<MaxPool2*>(&l)) {
      const FeatureShape s = l.input_shape();
      out.layers.emplace_back(model::MaxPool{s.channels, s.height, s.width});
      ++i;
      continue;
    }
    auto* conv = dynamic_cast<Conv3x3*>(&l);
    auto* lin = dynamic_cast<Linear*>(&l);
    if (!conv && !lin) throw ValidationError(where + l.kind() + " does not follow a weight layer");

    // Absorb [batchnorm] [sign].
    std::size_t next = i + 1;
    model::Activation act = model::Activation::None;
    model::BatchNorm bn;
    if (next < net.size()) {
      if (auto* b = dynamic_cast<BatchNorm*>(&net.layer(next))) {
        if (next + 1 >= net.size() || !dynamic_cast<SignAct*>(&net.layer(next + 1))) {
          throw ValidationError(where + "batchnorm must be followed by sign");
        }
        bn = export_bn(*b);
        act = model::Activation::BatchNormSign;
        next += 2;
      } else if (dynamic_cast<SignAct*>(&net.layer(next))) {
        act = model::Activation::Sign;
        next += 1;
      }
    }

    const WeightBlock& block = conv ? conv->block() : lin->block();
    const Eigen::VectorXd& w = block.latent();
    if (block.binarized()) {
      const SignWeights wb = binquant::sign_binarize(w);
      const binquant::CanonicalWeights cw = binquant::canonicalize(domain_for(block, mode, wb), wb);
      std::vector<std::uint8_t> bits(cw.bits.data(), cw.bits.data() + cw.bits.size());
      if (conv) {
        const FeatureShape s = conv->input_shape();
        model::ConvGeometry g{s.channels, conv->output_shape().channels, s.height, s.width,
                              conv->stride(), conv->padding()};
        out.layers.emplace_back(model::BinaryConv{g, cw.omega, std::move(bits), act, bn});
      } else {
        model::LinearGeometry g{static_cast<int>(l.input_shape().size()),
                                static_cast<int>(l.output_shape().size())};
        out.layers.emplace_back(model::BinaryLinear{g, cw.omega, std::move(bits), act, bn});
      }
    } else {
      std::vector<double> weights(w.data(), w.data() + w.size());
      if (conv) {
        const FeatureShape s = conv->input_shape();
        model::ConvGeometry g{s.channels, conv->output_shape().channels, s.height, s.width,
                              conv->stride(), conv->padding()};
        out.layers.emplace_back(model::FloatConv{
            g, std::move(weights), std::vector<double>(static_cast<std::size_t>(g.out_channels), 0.0), act, bn});
      } else {
        model::LinearGeometry g{static_cast<int>(l.input_shape().size()),
                                static_cast<int>(l.output_shape().size())};
        std::vector<double> bias = lin->bias().size()
                                       ? std::vector<double>(lin->bias().data(), lin->bias().data() + lin->bias().size())
                                       : std::vector<double>(static_cast<std::size_t>(g.out_features), 0.0);
        out.layers.emplace_back(model::FloatLinear{g, std::move(weights), std::move(bias), act, bn});
      }
    }
    i = next;
  }
  model::validate(out);
  return out;
}

namespace {

// Writes the layer result: +-1 decisions, or the remapped real value for act None.
template <class L>
void finish_binary(const L& layer, std::size_t per_channel, const infer::IntegerPreacts& pre,
                   std::vector<double>& out) {
  out.resize(pre.z_prime.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t ch = k / per_channel;
    const std::int64_t q = pre.q[pre.q.size() == 1 ? 0 : k % per_channel];
    const double z = infer::affine_remap(pre.z_prime[k], q, layer.omega);
    if (layer.act == model::Activation::None) {
      out[k] = z;
    } else {
      out[k] = model::activate_sign(layer.act, layer.bn, ch, z) ? 1.0 : -1.0;
    }
  }
}

}  // namespace

infer::Trace reference_forward(const model::QuantizedModel& m, std::span<const double> input) {
  model::validate(m);
  infer::Trace t;
  std::vector<double> cur(input.begin(), input.end());
  if (!m.layers.empty() && cur.size() != model::input_size(m.layers.front())) {
    throw ShapeError("input size does not match the model");
  }
  t.preacts.resize(m.layers.size());
  t.activations.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    std::vector<double> next(model::output_size(m.layers[i]));
    infer::IntegerPreacts& pre = t.preacts[i];
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, model::BinaryConv>) {
            const model::ConvGeometry& g = l.geom;
            const std::size_t positions = g.positions();
            pre.z_prime.assign(static_cast<std::size_t>(g.out_channels) * positions, 0);
            pre.q.assign(positions, 0);
            auto at = [&](int c, int iy, int ix) -> std::int64_t {
              if (iy < 0 || iy >= g.in_height || ix < 0 || ix >= g.in_width) return -1;
              const double v = cur[(static_cast<std::size_t>(c) * g.in_height + iy) * g.in_width + ix];
              if (v != 1.0 && v != -1.0) throw ShapeError("binarized layer needs +-1 inputs");
              return v > 0 ? 1 : -1;
            };
            for (int oy = 0; oy < g.out_height(); ++oy) {
              for (int ox = 0; ox < g.out_width(); ++ox) {
                const std::size_t pos = static_cast<std::size_t>(oy) * g.out_width() + ox;
                std::int64_t q = 0;
                for (int c = 0; c < g.in_channels; ++c) {
                  for (int k = 0; k < 9; ++k) q += at(c, oy * g.stride + k / 3 - g.padding, ox * g.stride + k % 3 - g.padding);
                }
                pre.q[pos] = q;
                for (int o = 0; o < g.out_channels; ++o) {
                  std::int64_t zp = 0;
                  for (int c = 0; c < g.in_channels; ++c) {
                    for (int k = 0; k < 9; ++k) {
                      if (l.bits[(static_cast<std::size_t>(o) * g.in_channels + c) * 9 + k]) {
                        zp += at(c, oy * g.stride + k / 3 - g.padding, ox * g.stride + k % 3 - g.padding);
                      }
                    }
                  }
                  pre.z_prime[static_cast<std::size_t>(o) * positions + pos] = zp;
                }
              }
            }
            finish_binary(l, positions, pre, next);
          } else if constexpr (std::is_same_v<T, model::BinaryLinear>) {
            const auto in = static_cast<std::size_t>(l.geom.in_features);
            std::int64_t q = 0;
            for (double v : cur) {
              if (v != 1.0 && v != -1.0) throw ShapeError("binarized layer needs +-1 inputs");
              q += v > 0 ? 1 : -1;
            }
            pre.q.assign(1, q);
            pre.z_prime.assign(static_cast<std::size_t>(l.geom.out_features), 0);
            for (std::size_t o = 0; o < pre.z_prime.size(); ++o) {
              for (std::size_t k = 0; k < in; ++k) {
                if (l.bits[o * in + k]) pre.z_prime[o] += cur[k] > 0 ? 1 : -1;
              }
            }
            finish_binary(l, 1, pre, next);
          } else if constexpr (std::is_same_v<T, model::MaxPool>) {
            model::max_pool(l, cur, next);
          } else if constexpr (std::is_same_v<T, model::FloatConv>) {
            model::float_conv_preact(l, cur, next);
            model::apply_activation(l.act, l.bn, l.geom.positions(), next);
          } else {
            model::float_linear_preact(l, cur, next);
            model::apply_activation(l.act, l.bn, 1, next);
          }
        },
        m.layers[i]);
    cur = std::move(next);
    t.activations[i] = cur;
  }
  t.output = cur;
  return t;
}

}  // namespace sbnn::nn
