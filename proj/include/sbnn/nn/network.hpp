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

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sbnn/common.hpp"
#include "sbnn/nn/layers.hpp"

namespace sbnn::nn {

enum class LayerKind { Conv3x3, Linear, BatchNorm, SignAct, Pool, Classifier };

const char* to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& s);

/// One entry of the layer stack. Input sizes are inferred from the previous
/// layer; `out` is the channel count (Conv3x3) or feature count (Linear,
/// Classifier) and is ignored by shape-preserving layers.
struct LayerSpec {
  LayerKind kind = LayerKind::SignAct;
  int out = 0;
  int stride = 1;
  int padding = 0;
  bool binarized = false;
  OmegaMode omega_mode = OmegaMode::Analytic;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  FeatureShape input;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Real 3x3 stem (zero padding 1) -> BN -> sign, then one binarized conv ->
/// BN -> sign per entry of `binary_widths` (padding 1), 2x2 max pooling when
/// the map is at least 2x2, and a real classifier.
NetworkSpec desk_convnet(FeatureShape input, int classes, int stem_width,
                         const std::vector<int>& binary_widths, OmegaMode mode);

/// Real linear -> BN -> sign, binarized hidden layers, real classifier.
NetworkSpec desk_mlp(int in_features, int classes, const std::vector<int>& hidden,
                     OmegaMode mode);

class Network {
 public:
  /// Throws ValidationError when the stack breaks the first/last real rule or
  /// shapes do not chain.
  Network(NetworkSpec spec, std::uint64_t seed);

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  [[nodiscard]] const Layer& layer(std::size_t i) const { return *layers_[i]; }
  [[nodiscard]] int classes() const;

  Batch forward(const Batch& x, const ForwardContext& ctx);
  /// Gradient of the loss w.r.t. the logits in, input gradient out.
  Batch backward(const Batch& grad_logits);

  std::vector<ParamRef> params();
  void zero_grad();

  /// Binarized weight blocks in layer order.
  std::vector<WeightBlock*> binarized_blocks();
  [[nodiscard]] std::size_t binarized_weight_count() const;
  /// Sum over binarized weights of (wbar + 1) / 2; wbar is hardtanh in surrogate mode.
  [[nodiscard]] double ones_sum(bool surrogate) const;
  /// Fraction of binarized weights whose sign is +1.
  [[nodiscard]] double ones_fraction() const { return ones_sum(false) / binarized_weight_count(); }

  /// Refits (tau, phi) of every Analytic binarized block.
  void refresh_omegas();

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct LossResult {
  double loss = 0.0;     // mean cross-entropy
  Batch grad;            // d loss / d logits
  std::size_t correct = 0;
};

LossResult softmax_cross_entropy(const Batch& logits, std::span<const int> labels);

struct PenaltyConfig {
  double gamma = 0.0;
  double ec = 1.0;
  /// Use this lambda instead of modulating it from gamma (finite-difference checks).
  double fixed_lambda = -1.0;
};

struct StepResult {
  double task_loss = 0.0;
  double penalty = 0.0;  // j
  double lambda = 0.0;
  std::size_t correct = 0;
  [[nodiscard]] double total() const { return task_loss + lambda * penalty; }
};

/// Forward, loss, penalty and backward for one minibatch. Gradients are
/// accumulated into the network's parameter gradients (zero them first).
StepResult compute_step(Network& net, const Batch& x, std::span<const int> labels,
                        const PenaltyConfig& penalty, const ForwardContext& ctx);

/// Loss value only, with the same lambda rule as compute_step.
double step_loss(Network& net, const Batch& x, std::span<const int> labels,
                 const PenaltyConfig& penalty, const ForwardContext& ctx);

/// Eval-mode argmax predictions.
std::vector<int> predict(Network& net, const Batch& x, std::size_t batch_size = 256);

}  // namespace sbnn::nn
