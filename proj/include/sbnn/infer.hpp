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
#include <vector>

#include "sbnn/bits.hpp"
#include "sbnn/kernels.hpp"
#include "sbnn/model.hpp"

/// Popcount-only inference over {0,1} weights.
///
/// For a binarized layer with weights w = (bit + xi) * eta and +-1 inputs x,
/// the pre-activation is z = eta * z' + alpha * q, where z' sums the inputs at
/// 1-bits and q sums every input in the receptive field. Both are integers, and
/// batchnorm followed by sign collapses to a per-channel integer threshold on z'
/// indexed by q.
namespace sbnn::infer {

/// z = eta * z' + xi * eta * q, with xi * eta written as alpha.
inline double affine_remap(std::int64_t z_prime, std::int64_t q, const binquant::OmegaParams& omega) {
  return omega.eta() * static_cast<double>(z_prime) + omega.alpha() * static_cast<double>(q);
}

/// Integer form of activate_sign(affine_remap(z', q)) for every reachable
/// (z', q) with |z'|, |q| <= fan_in.
class FusedThreshold {
 public:
  FusedThreshold() = default;
  FusedThreshold(const binquant::OmegaParams& omega, model::Activation act,
                 const model::BatchNorm& bn, std::size_t channels, std::size_t fan_in);

  [[nodiscard]] bool fire(std::size_t ch, std::int64_t z_prime, std::int64_t q) const {
    const std::int64_t t = table_[ch * width_ + static_cast<std::size_t>(q + fan_in_)];
    return ascending_[ch] ? z_prime >= t : z_prime <= t;
  }
  /// +1 iff z' >= threshold (ascending) or z' <= threshold (descending).
  [[nodiscard]] std::int64_t threshold(std::size_t ch, std::int64_t q) const {
    return table_[ch * width_ + static_cast<std::size_t>(q + fan_in_)];
  }
  [[nodiscard]] bool ascending(std::size_t ch) const { return ascending_[ch] != 0; }
  [[nodiscard]] std::int64_t fan_in() const { return fan_in_; }

 private:
  std::int64_t fan_in_ = 0;
  std::size_t width_ = 0;
  std::vector<std::int32_t> table_;
  std::vector<std::uint8_t> ascending_;
};

struct LayerCounters {
  std::uint64_t bops = 0;              // XNOR + popcount per weight position of executed kernels
  std::uint64_t connected = 0;         // 1-bit positions actually summed (skip-capable count)
  std::uint64_t popcounts = 0;         // popcount instructions issued
  std::uint64_t gathers = 0;           // single-bit kernels resolved by indexed lookup
  std::uint64_t skipped_kernels = 0;   // zero kernels never touched
  std::uint64_t dense_kernels = 0;     // kernel applications through the popcount path
  std::uint64_t flops = 0;             // real-valued layers, 2 per multiply-accumulate

  LayerCounters& operator+=(const LayerCounters& o);
  friend bool operator==(const LayerCounters&, const LayerCounters&) = default;
};

struct OpsCounters {
  std::vector<LayerCounters> layers;
  std::uint64_t samples = 0;

  OpsCounters& operator+=(const OpsCounters& o);
  [[nodiscard]] LayerCounters total() const;
};

struct EngineOptions {
  /// When false, every kernel runs through the popcount path as in a dense BNN.
  bool skip_sparse_kernels = true;
};

/// Integer pre-activations of one binarized layer: z' per output value
/// (channel-major) and q per spatial position (one entry for linear layers).
struct IntegerPreacts {
  std::vector<std::int64_t> z_prime;
  std::vector<std::int64_t> q;
};

struct Trace {
  std::vector<double> output;
  std::vector<IntegerPreacts> preacts;  // one per model layer; empty for real layers
  std::vector<std::vector<double>> activations;  // output of every layer
};

class SparseEngine {
 public:
  explicit SparseEngine(model::QuantizedModel model, EngineOptions options = {});

  [[nodiscard]] const model::QuantizedModel& model() const { return model_; }
  [[nodiscard]] std::size_t input_size() const;
  [[nodiscard]] std::size_t output_size() const;

  std::vector<double> infer(std::span<const double> input, OpsCounters* counters = nullptr) const;
  Trace trace(std::span<const double> input, OpsCounters* counters = nullptr) const;

  /// Runs every row of `inputs`; `threads` workers each take a contiguous block.
  Batch infer_batch(const Batch& inputs, OpsCounters* counters = nullptr, int threads = 1) const;

  [[nodiscard]] const KernelCensus& census(std::size_t layer) const { return census_[layer]; }
  [[nodiscard]] const FusedThreshold& threshold(std::size_t layer) const { return fused_[layer]; }

 private:
  struct Activations;

  void run(std::span<const double> input, OpsCounters* counters, Trace* trace,
           std::vector<double>& output) const;
  void run_binary_conv(std::size_t index, const model::BinaryConv& layer, const Activations& in,
                       Activations& out, LayerCounters& counters, IntegerPreacts* pre) const;
  void run_binary_linear(std::size_t index, const model::BinaryLinear& layer,
                         const Activations& in, Activations& out, LayerCounters& counters,
                         IntegerPreacts* pre) const;

  model::QuantizedModel model_;
  EngineOptions options_;
  std::vector<KernelCensus> census_;        // binarized conv layers only
  std::vector<FusedThreshold> fused_;       // binarized layers with a sign activation
  std::vector<PackedRows> linear_rows_;     // binarized linear layers only
};

/// Worker count from SBNN_THREADS, capped by `requested` when that is positive.
int worker_count(int requested = 0);

}  // namespace sbnn::infer
