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

#include "sbnn/infer.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <string>
#include <thread>

namespace sbnn::infer {

using model::Activation;

FusedThreshold::FusedThreshold(const binquant::OmegaParams& omega, Activation act,
                               const model::BatchNorm& bn, std::size_t channels,
                               std::size_t fan_in)
    : fan_in_(static_cast<std::int64_t>(fan_in)),
      width_(2 * fan_in + 1),
      table_(channels * width_),
      ascending_(channels) {
  const std::int64_t n = fan_in_;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double slope = act == Activation::BatchNormSign ? bn.gamma[ch] * omega.eta() : omega.eta();
    const bool up = slope >= 0.0;
    ascending_[ch] = up ? 1 : 0;
    for (std::int64_t q = -n; q <= n; ++q) {
      auto decide = [&](std::int64_t zp) {
        return model::activate_sign(act, bn, ch, affine_remap(zp, q, omega));
      };
      // The decision is monotone in z' because every rounding step is.
      std::int64_t t = 0;
      if (up) {
        std::int64_t lo = -n;
        std::int64_t hi = n + 1;  // first firing value lies in [lo, hi]
        while (lo < hi) {
          const std::int64_t mid = lo + (hi - lo) / 2;
          if (decide(mid)) {
            hi = mid;
          } else {
            lo = mid + 1;
          }
        }
        t = lo;
      } else {
        std::int64_t lo = -n - 1;  // last firing value lies in [lo, hi]
        std::int64_t hi = n;
        while (lo < hi) {
          const std::int64_t mid = lo + (hi - lo + 1) / 2;
          if (decide(mid)) {
            lo = mid;
          } else {
            hi = mid - 1;
          }
        }
        t = lo;
      }
      table_[ch * width_ + static_cast<std::size_t>(q + n)] = static_cast<std::int32_t>(t);
    }
  }
}

LayerCounters& LayerCounters::operator+=(const LayerCounters& o) {
  bops += o.bops;
  connected += o.connected;
  popcounts += o.popcounts;
  gathers += o.gathers;
  skipped_kernels += o.skipped_kernels;
  dense_kernels += o.dense_kernels;
  flops += o.flops;
  return *this;
}

OpsCounters& OpsCounters::operator+=(const OpsCounters& o) {
  if (layers.size() < o.layers.size()) layers.resize(o.layers.size());
  for (std::size_t i = 0; i < o.layers.size(); ++i) layers[i] += o.layers[i];
  samples += o.samples;
  return *this;
}

LayerCounters OpsCounters::total() const {
  LayerCounters t;
  for (const auto& l : layers) t += l;
  return t;
}

struct SparseEngine::Activations {
  bool binary = false;
  std::vector<double> real;         // valid when !binary
  std::vector<std::uint8_t> bits;   // valid when binary: +1 -> 1, -1 -> 0

  [[nodiscard]] std::vector<double> as_real() const {
    if (!binary) return real;
    std::vector<double> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? 1.0 : -1.0;
    return out;
  }
};

SparseEngine::SparseEngine(model::QuantizedModel model, EngineOptions options)
    : model_(std::move(model)), options_(options) {
  model::validate(model_);
  const std::size_t n = model_.layers.size();
  census_.resize(n);
  fused_.resize(n);
  linear_rows_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto* conv = std::get_if<model::BinaryConv>(&model_.layers[i])) {
      census_[i] = classify_kernels(conv->bits);
      if (conv->act != Activation::None) {
        fused_[i] = FusedThreshold(conv->omega, conv->act, conv->bn,
                                   static_cast<std::size_t>(conv->geom.out_channels),
                                   conv->geom.fan_in());
      }
    } else if (const auto* lin = std::get_if<model::BinaryLinear>(&model_.layers[i])) {
      const auto rows = static_cast<std::size_t>(lin->geom.out_features);
      const auto cols = static_cast<std::size_t>(lin->geom.in_features);
      PackedRows packed(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (lin->bits[r * cols + c]) packed.set(r, c, true);
        }
      }
      linear_rows_[i] = std::move(packed);
      if (lin->act != Activation::None) {
        fused_[i] = FusedThreshold(lin->omega, lin->act, lin->bn, rows, cols);
      }
    }
  }
}

std::size_t SparseEngine::input_size() const {
  return model_.layers.empty() ? 0 : model::input_size(model_.layers.front());
}

std::size_t SparseEngine::output_size() const {
  return model_.layers.empty() ? 0 : model::output_size(model_.layers.back());
}

void SparseEngine::run_binary_conv(std::size_t index, const model::BinaryConv& layer,
                                   const Activations& in, Activations& out,
                                   LayerCounters& counters, IntegerPreacts* pre) const {
  const model::ConvGeometry& g = layer.geom;
  const int oh = g.out_height();
  const int ow = g.out_width();
  const auto positions = static_cast<std::size_t>(oh) * ow;
  const auto in_ch = static_cast<std::size_t>(g.in_channels);
  const auto out_ch = static_cast<std::size_t>(g.out_channels);
  const KernelCensus& census = census_[index];
  const bool skip = options_.skip_sparse_kernels;
  const bool binary_out = layer.act != Activation::None;

  out.binary = binary_out;
  if (binary_out) {
    out.bits.assign(out_ch * positions, 0);
  } else {
    out.real.assign(out_ch * positions, 0.0);
  }
  if (pre) {
    pre->z_prime.assign(out_ch * positions, 0);
    pre->q.assign(positions, 0);
  }

  std::vector<std::uint16_t> windows(in_ch);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const std::size_t pos = static_cast<std::size_t>(oy) * ow + ox;
      // Pack each input channel's 3x3 window; the halo stays 0 (-1).
      std::int64_t ones = 0;
      for (std::size_t c = 0; c < in_ch; ++c) {
        std::uint16_t w = 0;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * g.stride + ky - g.padding;
          if (iy < 0 || iy >= g.in_height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * g.stride + kx - g.padding;
            if (ix < 0 || ix >= g.in_width) continue;
            if (in.bits[(c * g.in_height + iy) * g.in_width + ix]) {
              w |= static_cast<std::uint16_t>(1U << (ky * 3 + kx));
            }
          }
        }
        windows[c] = w;
        ones += std::popcount(w);
      }
      counters.popcounts += in_ch;
      const std::int64_t q = 2 * ones - static_cast<std::int64_t>(9 * in_ch);
      if (pre) pre->q[pos] = q;

      for (std::size_t o = 0; o < out_ch; ++o) {
        std::int64_t zp = 0;
        for (std::size_t c = 0; c < in_ch; ++c) {
          const KernelClass& k = census.classes[o * in_ch + c];
          if (skip && k.tag == KernelClass::Tag::Zero) {
            ++counters.skipped_kernels;
            continue;
          }
          if (skip && k.tag == KernelClass::Tag::Single) {
            zp += ((windows[c] >> k.index()) & 1U) ? 1 : -1;
            ++counters.gathers;
            ++counters.connected;
            continue;
          }
          const int hw = k.hamming_weight();
          zp += 2 * std::popcount(static_cast<std::uint16_t>(windows[c] & k.pattern)) - hw;
          ++counters.popcounts;
          ++counters.dense_kernels;
          counters.bops += 2 * kKernelTaps;
          counters.connected += static_cast<std::uint64_t>(hw);
        }
        const std::size_t idx = o * positions + pos;
        if (pre) pre->z_prime[idx] = zp;
        if (binary_out) {
          out.bits[idx] = fused_[index].fire(o, zp, q) ? 1 : 0;
        } else {
          out.real[idx] = affine_remap(zp, q, layer.omega);
        }
      }
    }
  }
}

void SparseEngine::run_binary_linear(std::size_t index, const model::BinaryLinear& layer,
                                     const Activations& in, Activations& out,
                                     LayerCounters& counters, IntegerPreacts* pre) const {
  const auto rows = static_cast<std::size_t>(layer.geom.out_features);
  const auto cols = static_cast<std::size_t>(layer.geom.in_features);
  PackedBits x(cols);
  for (std::size_t i = 0; i < cols; ++i) {
    if (in.bits[i]) x.set(i, true);
  }
  const std::int64_t q = q_compute(x);
  counters.popcounts += x.words().size();
  const bool binary_out = layer.act != Activation::None;
  out.binary = binary_out;
  if (binary_out) {
    out.bits.assign(rows, 0);
  } else {
    out.real.assign(rows, 0.0);
  }
  if (pre) {
    pre->z_prime.assign(rows, 0);
    pre->q.assign(1, q);
  }
  const PackedRows& packed = linear_rows_[index];
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = packed.row(r);
    const std::size_t row_ones = popcount(row);
    std::int64_t zp = 0;
    if (options_.skip_sparse_kernels && row_ones == 0) {
      ++counters.skipped_kernels;
    } else {
      zp = popcount_dot(x.words(), row);
      counters.popcounts += 2 * row.size();
      ++counters.dense_kernels;
      counters.bops += 2 * cols;
      counters.connected += row_ones;
    }
    if (pre) pre->z_prime[r] = zp;
    if (binary_out) {
      out.bits[r] = fused_[index].fire(r, zp, q) ? 1 : 0;
    } else {
      out.real[r] = affine_remap(zp, q, layer.omega);
    }
  }
}

void SparseEngine::run(std::span<const double> input, OpsCounters* counters, Trace* trace,
                       std::vector<double>& output) const {
  if (model_.layers.empty()) {
    output.assign(input.begin(), input.end());
    return;
  }
  if (input.size() != input_size()) {
    throw ShapeError("input has " + std::to_string(input.size()) + " values, model expects " +
                     std::to_string(input_size()));
  }
  Activations cur;
  cur.real.assign(input.begin(), input.end());
  if (model::is_binary(model_.layers.front())) {
    cur.binary = true;
    cur.bits.resize(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (input[i] != 1.0 && input[i] != -1.0) {
        throw ShapeError("binarized first layer needs +-1 inputs");
      }
      cur.bits[i] = input[i] > 0 ? 1 : 0;
    }
  }
  OpsCounters local;
  local.layers.resize(model_.layers.size());
  local.samples = 1;
  if (trace) {
    trace->preacts.assign(model_.layers.size(), {});
    trace->activations.assign(model_.layers.size(), {});
  }

  for (std::size_t i = 0; i < model_.layers.size(); ++i) {
    Activations next;
    LayerCounters& lc = local.layers[i];
    IntegerPreacts* pre = trace ? &trace->preacts[i] : nullptr;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, model::BinaryConv>) {
            run_binary_conv(i, l, cur, next, lc, pre);
          } else if constexpr (std::is_same_v<T, model::BinaryLinear>) {
            run_binary_linear(i, l, cur, next, lc, pre);
          } else if constexpr (std::is_same_v<T, model::MaxPool>) {
            const FeatureShape os = l.output_shape();
            next.binary = cur.binary;
            if (cur.binary) {
              next.bits.assign(os.size(), 0);
              for (int c = 0; c < l.channels; ++c) {
                for (int oy = 0; oy < os.height; ++oy) {
                  for (int ox = 0; ox < os.width; ++ox) {
                    std::uint8_t any = 0;
                    for (int dy = 0; dy < 2; ++dy) {
                      for (int dx = 0; dx < 2; ++dx) {
                        any |= cur.bits[(static_cast<std::size_t>(c) * l.in_height + 2 * oy + dy) *
                                            l.in_width + 2 * ox + dx];
                      }
                    }
                    next.bits[(static_cast<std::size_t>(c) * os.height + oy) * os.width + ox] = any;
                  }
                }
              }
            } else {
              next.real.assign(os.size(), 0.0);
              model::max_pool(l, cur.real, next.real);
            }
          } else {
            const std::vector<double> x = cur.as_real();
            std::vector<double> y(model::output_size(l));
            std::size_t per_channel = 1;
            if constexpr (std::is_same_v<T, model::FloatConv>) {
              model::float_conv_preact(l, x, y);
              per_channel = l.geom.positions();
              lc.flops += 2 * l.geom.weight_count() * l.geom.positions();
            } else {
              model::float_linear_preact(l, x, y);
              lc.flops += 2 * l.geom.weight_count();
            }
            model::apply_activation(l.act, l.bn, per_channel, y);
            if (l.act == Activation::None) {
              next.binary = false;
              next.real = std::move(y);
            } else {
              next.binary = true;
              next.bits.resize(y.size());
              for (std::size_t k = 0; k < y.size(); ++k) next.bits[k] = y[k] > 0 ? 1 : 0;
            }
          }
        },
        model_.layers[i]);
    cur = std::move(next);
    if (trace) trace->activations[i] = cur.as_real();
  }
  output = cur.as_real();
  if (counters) *counters += local;
}

std::vector<double> SparseEngine::infer(std::span<const double> input, OpsCounters* counters) const {
  std::vector<double> out;
  run(input, counters, nullptr, out);
  return out;
}

Trace SparseEngine::trace(std::span<const double> input, OpsCounters* counters) const {
  Trace t;
  run(input, counters, &t, t.output);
  return t;
}

Batch SparseEngine::infer_batch(const Batch& inputs, OpsCounters* counters, int threads) const {
  const auto rows = static_cast<std::size_t>(inputs.rows());
  if (inputs.cols() != static_cast<Eigen::Index>(input_size())) {
    throw ShapeError("batch has " + std::to_string(inputs.cols()) +
                     " features per row, model expects " + std::to_string(input_size()));
  }
  Batch out(inputs.rows(), static_cast<Eigen::Index>(output_size()));
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), rows));
  std::vector<OpsCounters> partial(workers);
  auto work = [&](std::size_t w) {
    const std::size_t begin = rows * w / workers;
    const std::size_t end = rows * (w + 1) / workers;
    for (std::size_t r = begin; r < end; ++r) {
      const auto row = inputs.row(static_cast<Eigen::Index>(r));
      const std::vector<double> y =
          infer(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), &partial[w]);
      for (std::size_t k = 0; k < y.size(); ++k) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = y[k];
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (counters) {
    for (const auto& p : partial) *counters += p;
  }
  return out;
}

int worker_count(int requested) {
  int n = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SBNN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  if (requested > 0) n = std::min(n, requested);
  return n;
}

}  // namespace sbnn::infer
