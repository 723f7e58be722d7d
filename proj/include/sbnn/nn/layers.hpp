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
#include <random>
#include <string>
#include <vector>

#include "sbnn/binquant.hpp"
#include "sbnn/common.hpp"

namespace sbnn::nn {

enum class OmegaMode { Analytic, Learned, FixedPM1 };

const char* to_string(OmegaMode mode);
OmegaMode parse_omega_mode(const std::string& s);

struct ForwardContext {
  bool training = false;
  /// Replace sign by hardtanh everywhere. Its derivative is exactly the clipped
  /// straight-through estimate, which makes the backward pass checkable by
  /// finite differences.
  bool surrogate = false;
};

/// A parameter vector and its gradient, as seen by the optimizer.
struct ParamRef {
  Eigen::VectorXd* value;
  Eigen::VectorXd* grad;
  /// Latent binarized weights are clipped to [-1, 1] after each update.
  bool clip_unit = false;
};

/// Latent real weights and the rule turning them into the effective weights
/// used in the forward pass.
class WeightBlock {
 public:
  WeightBlock() = default;
  WeightBlock(std::size_t count, std::size_t fan_in, bool binarized, OmegaMode mode,
              std::mt19937_64& rng);

  [[nodiscard]] bool binarized() const { return binarized_; }
  [[nodiscard]] OmegaMode mode() const { return mode_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(latent_.size()); }

  Eigen::VectorXd& latent() { return latent_; }
  [[nodiscard]] const Eigen::VectorXd& latent() const { return latent_; }
  [[nodiscard]] binquant::OmegaParams omega() const { return {omega_[0], omega_[1]}; }
  void set_omega(const binquant::OmegaParams& o) {
    omega_[0] = o.tau;
    omega_[1] = o.phi;
  }

  /// Analytic mode: refit (tau, phi) to the current latent weights.
  void refresh_omega();

  /// +-1 (or hardtanh in surrogate mode) image of the latent weights.
  [[nodiscard]] Eigen::VectorXd binarized_values(bool surrogate) const;
  [[nodiscard]] Eigen::VectorXd effective(bool surrogate) const;

  /// Backpropagates d(loss)/d(effective weights) into the latent and domain grads.
  void accumulate(const Eigen::VectorXd& grad_effective, bool surrogate);
  /// Adds `coeff` to the gradient of every latent weight inside the STE window.
  void add_penalty_gradient(double coeff);

  void zero_grad();
  void collect(std::vector<ParamRef>& out);

  Eigen::VectorXd& latent_grad() { return latent_grad_; }
  Eigen::VectorXd& omega_grad() { return omega_grad_; }
  Eigen::VectorXd& omega_vector() { return omega_; }

 private:
  bool binarized_ = false;
  OmegaMode mode_ = OmegaMode::Analytic;
  Eigen::VectorXd latent_;
  Eigen::VectorXd latent_grad_;
  Eigen::VectorXd omega_{Eigen::Vector2d(1.0, 0.0)};  // (tau, phi)
  Eigen::VectorXd omega_grad_{Eigen::Vector2d::Zero()};
};

class Layer {
 public:
  virtual ~Layer() = default;

  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual FeatureShape input_shape() const = 0;
  [[nodiscard]] virtual FeatureShape output_shape() const = 0;

  virtual Batch forward(const Batch& x, const ForwardContext& ctx) = 0;
  /// Uses state cached by the last forward call.
  virtual Batch backward(const Batch& grad_out) = 0;

  virtual void collect(std::vector<ParamRef>& /*out*/) {}
  virtual void zero_grad() {}
  /// Binarized weights of this layer, or nullptr.
  virtual WeightBlock* weights() { return nullptr; }
  [[nodiscard]] const WeightBlock* weights() const { return const_cast<Layer*>(this)->weights(); }
};

/// 3x3 convolution without bias. Binarized layers pad with -1, real ones with 0.
class Conv3x3 final : public Layer {
 public:
  Conv3x3(FeatureShape input, int out_channels, int stride, int padding, bool binarized,
          OmegaMode mode, std::mt19937_64& rng);

  [[nodiscard]] std::string kind() const override { return "conv3x3"; }
  [[nodiscard]] FeatureShape input_shape() const override { return in_; }
  [[nodiscard]] FeatureShape output_shape() const override;
  [[nodiscard]] int stride() const { return stride_; }
  [[nodiscard]] int padding() const { return padding_; }
  [[nodiscard]] double pad_value() const { return block_.binarized() ? -1.0 : 0.0; }

  Batch forward(const Batch& x, const ForwardContext& ctx) override;
  Batch backward(const Batch& grad_out) override;
  void collect(std::vector<ParamRef>& out) override { block_.collect(out); }
  void zero_grad() override { block_.zero_grad(); }
  WeightBlock* weights() override { return block_.binarized() ? &block_ : nullptr; }
  WeightBlock& block() { return block_; }
  [[nodiscard]] const WeightBlock& block() const { return block_; }

 private:
  [[nodiscard]] Eigen::MatrixXd im2col(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  FeatureShape in_;
  int out_channels_;
  int stride_;
  int padding_;
  WeightBlock block_;
  bool surrogate_ = false;
  Eigen::MatrixXd weff_;             // out x (in * 9)
  std::vector<Eigen::MatrixXd> cols_;
};

/// Fully connected layer; real-valued layers carry a bias.
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, bool binarized, bool bias, OmegaMode mode,
         std::mt19937_64& rng);

  [[nodiscard]] std::string kind() const override { return bias_.size() ? "classifier" : "linear"; }
  [[nodiscard]] FeatureShape input_shape() const override { return {in_, 1, 1}; }
  [[nodiscard]] FeatureShape output_shape() const override { return {out_, 1, 1}; }

  Batch forward(const Batch& x, const ForwardContext& ctx) override;
  Batch backward(const Batch& grad_out) override;
  void collect(std::vector<ParamRef>& out) override;
  void zero_grad() override;
  WeightBlock* weights() override { return block_.binarized() ? &block_ : nullptr; }
  WeightBlock& block() { return block_; }
  [[nodiscard]] const WeightBlock& block() const { return block_; }
  Eigen::VectorXd& bias() { return bias_; }
  [[nodiscard]] const Eigen::VectorXd& bias() const { return bias_; }

 private:
  int in_;
  int out_;
  WeightBlock block_;
  Eigen::VectorXd bias_;
  Eigen::VectorXd bias_grad_;
  bool surrogate_ = false;
  Eigen::MatrixXd weff_;  // out x in
  Batch x_;
};

/// Per-channel batch normalization over batch and spatial positions.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(FeatureShape shape, double eps = 1e-5, double momentum = 0.1);

  [[nodiscard]] std::string kind() const override { return "batchnorm"; }
  [[nodiscard]] FeatureShape input_shape() const override { return shape_; }
  [[nodiscard]] FeatureShape output_shape() const override { return shape_; }

  Batch forward(const Batch& x, const ForwardContext& ctx) override;
  Batch backward(const Batch& grad_out) override;
  void collect(std::vector<ParamRef>& out) override;
  void zero_grad() override;

  Eigen::VectorXd gamma, beta, running_mean, running_var;
  double eps;
  double momentum;

 private:
  FeatureShape shape_;
  Eigen::VectorXd gamma_grad_, beta_grad_;
  Batch xhat_;
  Eigen::VectorXd inv_std_;
  bool used_batch_stats_ = false;
};

/// sign with ties to +1; backward passes gradients where |x| <= 1.
class SignAct final : public Layer {
 public:
  explicit SignAct(FeatureShape shape) : shape_(shape) {}

  [[nodiscard]] std::string kind() const override { return "sign"; }
  [[nodiscard]] FeatureShape input_shape() const override { return shape_; }
  [[nodiscard]] FeatureShape output_shape() const override { return shape_; }

  Batch forward(const Batch& x, const ForwardContext& ctx) override;
  Batch backward(const Batch& grad_out) override;

 private:
  FeatureShape shape_;
  Batch x_;
};

/// 2x2 max pooling with stride 2; ties route the gradient to the first maximum.
class MaxPool2 final : public Layer {
 public:
  explicit MaxPool2(FeatureShape shape) : shape_(shape) {}

  [[nodiscard]] std::string kind() const override { return "maxpool"; }
  [[nodiscard]] FeatureShape input_shape() const override { return shape_; }
  [[nodiscard]] FeatureShape output_shape() const override {
    return {shape_.channels, shape_.height / 2, shape_.width / 2};
  }

  Batch forward(const Batch& x, const ForwardContext& ctx) override;
  Batch backward(const Batch& grad_out) override;

 private:
  FeatureShape shape_;
  std::vector<std::vector<Eigen::Index>> argmax_;
  Eigen::Index rows_ = 0;
};

}  // namespace sbnn::nn
