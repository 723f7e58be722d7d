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

#include "sbnn/nn/layers.hpp"

#include <cmath>

namespace sbnn::nn {

const char* to_string(OmegaMode mode) {
  switch (mode) {
    case OmegaMode::Analytic: return "analytic";
    case OmegaMode::Learned: return "learned";
    case OmegaMode::FixedPM1: return "pm1";
  }
  return "analytic";
}

OmegaMode parse_omega_mode(const std::string& s) {
  if (s == "analytic") return OmegaMode::Analytic;
  if (s == "learned") return OmegaMode::Learned;
  if (s == "pm1") return OmegaMode::FixedPM1;
  throw ValidationError("unknown omega mode '" + s + "' (expected analytic, learned or pm1)");
}

// ---------------------------------------------------------------------------
// WeightBlock

WeightBlock::WeightBlock(std::size_t count, std::size_t fan_in, bool binarized, OmegaMode mode,
                         std::mt19937_64& rng)
    : binarized_(binarized), mode_(mode) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  latent_.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < latent_.size(); ++i) latent_[i] = dist(rng);
  latent_grad_ = Eigen::VectorXd::Zero(latent_.size());
  if (binarized_ && mode_ != OmegaMode::FixedPM1) refresh_omega();
}

void WeightBlock::refresh_omega() {
  if (!binarized_) return;
  const SignWeights wb = binquant::sign_binarize(latent_);
  set_omega(binquant::fit_omega(latent_, wb).omega);
}

Eigen::VectorXd WeightBlock::binarized_values(bool surrogate) const {
  if (surrogate) return latent_.cwiseMax(-1.0).cwiseMin(1.0);
  return latent_.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

Eigen::VectorXd WeightBlock::effective(bool surrogate) const {
  if (!binarized_) return latent_;
  return (omega_[0] * binarized_values(surrogate)).array() + omega_[1];
}

void WeightBlock::accumulate(const Eigen::VectorXd& grad_effective, bool surrogate) {
  if (!binarized_) {
    latent_grad_ += grad_effective;
    return;
  }
  const double tau = omega_[0];
  for (Eigen::Index i = 0; i < latent_.size(); ++i) {
    latent_grad_[i] += binquant::ste_gradient(tau * grad_effective[i], latent_[i]);
  }
  if (mode_ == OmegaMode::Learned) {
    omega_grad_[0] += grad_effective.dot(binarized_values(surrogate));
    omega_grad_[1] += grad_effective.sum();
  }
}

void WeightBlock::add_penalty_gradient(double coeff) {
  for (Eigen::Index i = 0; i < latent_.size(); ++i) {
    latent_grad_[i] += binquant::ste_gradient(coeff, latent_[i]);
  }
}

void WeightBlock::zero_grad() {
  latent_grad_.setZero();
  omega_grad_.setZero();
}

void WeightBlock::collect(std::vector<ParamRef>& out) {
  out.push_back({&latent_, &latent_grad_, binarized_});
  if (binarized_ && mode_ == OmegaMode::Learned) out.push_back({&omega_, &omega_grad_, false});
}

// ---------------------------------------------------------------------------
// Conv3x3

Conv3x3::Conv3x3(FeatureShape input, int out_channels, int stride, int padding, bool binarized,
                 OmegaMode mode, std::mt19937_64& rng)
    : in_(input), out_channels_(out_channels), stride_(stride), padding_(padding) {
  if (out_channels <= 0 || stride <= 0 || padding < 0) throw ValidationError("bad conv parameters");
  if (input.height + 2 * padding < 3 || input.width + 2 * padding < 3) {
    throw ShapeError("conv input smaller than the 3x3 window");
  }
  const std::size_t fan_in = static_cast<std::size_t>(input.channels) * 9;
  block_ = WeightBlock(fan_in * static_cast<std::size_t>(out_channels), fan_in, binarized, mode, rng);
}

FeatureShape Conv3x3::output_shape() const {
  return {out_channels_, (in_.height + 2 * padding_ - 3) / stride_ + 1,
          (in_.width + 2 * padding_ - 3) / stride_ + 1};
}

Eigen::MatrixXd Conv3x3::im2col(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const FeatureShape out = output_shape();
  const Eigen::Index positions = static_cast<Eigen::Index>(out.height) * out.width;
  Eigen::MatrixXd cols(in_.channels * 9, positions);
  const double pad = pad_value();
  for (int c = 0; c < in_.channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Eigen::Index r = c * 9 + ky * 3 + kx;
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * stride_ + ky - padding_;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * stride_ + kx - padding_;
            const bool inside = iy >= 0 && iy < in_.height && ix >= 0 && ix < in_.width;
            cols(r, oy * out.width + ox) = inside ? x((c * in_.height + iy) * in_.width + ix) : pad;
          }
        }
      }
    }
  }
  return cols;
}

Batch Conv3x3::forward(const Batch& x, const ForwardContext& ctx) {
  if (x.cols() != static_cast<Eigen::Index>(in_.size())) throw ShapeError("conv3x3: input size mismatch");
  surrogate_ = ctx.surrogate;
  const Eigen::VectorXd w = block_.effective(ctx.surrogate);
  weff_ = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      w.data(), out_channels_, in_.channels * 9);
  const FeatureShape out = output_shape();
  const Eigen::Index positions = static_cast<Eigen::Index>(out.height) * out.width;
  Batch y(x.rows(), static_cast<Eigen::Index>(out.size()));
  if (ctx.training) cols_.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    Eigen::MatrixXd cols = im2col(x.row(b));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> yb(
        y.row(b).data(), out_channels_, positions);
    yb.noalias() = weff_ * cols;
    if (ctx.training) cols_[static_cast<std::size_t>(b)] = std::move(cols);
  }
  return y;
}

Batch Conv3x3::backward(const Batch& grad_out) {
  const FeatureShape out = output_shape();
  const Eigen::Index positions = static_cast<Eigen::Index>(out.height) * out.width;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dw =
      Eigen::MatrixXd::Zero(out_channels_, in_.channels * 9);
  Batch dx = Batch::Zero(grad_out.rows(), static_cast<Eigen::Index>(in_.size()));
  for (Eigen::Index b = 0; b < grad_out.rows(); ++b) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(
        grad_out.row(b).data(), out_channels_, positions);
    const Eigen::MatrixXd& cols = cols_[static_cast<std::size_t>(b)];
    dw.noalias() += g * cols.transpose();
    const Eigen::MatrixXd dcols = weff_.transpose() * g;
    for (int c = 0; c < in_.channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const Eigen::Index r = c * 9 + ky * 3 + kx;
          for (int oy = 0; oy < out.height; ++oy) {
            const int iy = oy * stride_ + ky - padding_;
            if (iy < 0 || iy >= in_.height) continue;
            for (int ox = 0; ox < out.width; ++ox) {
              const int ix = ox * stride_ + kx - padding_;
              if (ix < 0 || ix >= in_.width) continue;
              dx(b, (c * in_.height + iy) * in_.width + ix) += dcols(r, oy * out.width + ox);
            }
          }
        }
      }
    }
  }
  block_.accumulate(Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size()), surrogate_);
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features, bool binarized, bool bias, OmegaMode mode,
               std::mt19937_64& rng)
    : in_(in_features), out_(out_features) {
  if (in_features <= 0 || out_features <= 0) throw ValidationError("bad linear parameters");
  block_ = WeightBlock(static_cast<std::size_t>(in_features) * out_features,
                       static_cast<std::size_t>(in_features), binarized, mode, rng);
  if (bias) {
    bias_ = Eigen::VectorXd::Zero(out_features);
    bias_grad_ = Eigen::VectorXd::Zero(out_features);
  }
}

Batch Linear::forward(const Batch& x, const ForwardContext& ctx) {
  if (x.cols() != in_) throw ShapeError("linear: input size mismatch");
  surrogate_ = ctx.surrogate;
  const Eigen::VectorXd w = block_.effective(ctx.surrogate);
  weff_ = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      w.data(), out_, in_);
  Batch y = x * weff_.transpose();
  if (bias_.size()) y.rowwise() += bias_.transpose();
  if (ctx.training) x_ = x;
  return y;
}

Batch Linear::backward(const Batch& grad_out) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dw =
      grad_out.transpose() * x_;
  block_.accumulate(Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size()), surrogate_);
  if (bias_.size()) bias_grad_ += grad_out.colwise().sum().transpose();
  return grad_out * weff_;
}

void Linear::collect(std::vector<ParamRef>& out) {
  block_.collect(out);
  if (bias_.size()) out.push_back({&bias_, &bias_grad_, false});
}

void Linear::zero_grad() {
  block_.zero_grad();
  if (bias_.size()) bias_grad_.setZero();
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(FeatureShape shape, double eps_, double momentum_)
    : gamma(Eigen::VectorXd::Ones(shape.channels)),
      beta(Eigen::VectorXd::Zero(shape.channels)),
      running_mean(Eigen::VectorXd::Zero(shape.channels)),
      running_var(Eigen::VectorXd::Ones(shape.channels)),
      eps(eps_),
      momentum(momentum_),
      shape_(shape),
      gamma_grad_(Eigen::VectorXd::Zero(shape.channels)),
      beta_grad_(Eigen::VectorXd::Zero(shape.channels)) {}

Batch BatchNorm::forward(const Batch& x, const ForwardContext& ctx) {
  if (x.cols() != static_cast<Eigen::Index>(shape_.size())) throw ShapeError("batchnorm: input size mismatch");
  const Eigen::Index hw = static_cast<Eigen::Index>(shape_.height) * shape_.width;
  const auto count = static_cast<double>(x.rows() * hw);
  Batch y(x.rows(), x.cols());
  xhat_.resize(x.rows(), x.cols());
  inv_std_.resize(shape_.channels);
  used_batch_stats_ = ctx.training;
  for (int c = 0; c < shape_.channels; ++c) {
    const auto block = x.middleCols(c * hw, hw);
    double mean = 0.0;
    double var = 0.0;
    if (ctx.training) {
      mean = block.mean();
      var = (block.array() - mean).square().sum() / count;
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    inv_std_[c] = 1.0 / std::sqrt(var + eps);
    xhat_.middleCols(c * hw, hw) = (block.array() - mean) * inv_std_[c];
    y.middleCols(c * hw, hw) = (gamma[c] * xhat_.middleCols(c * hw, hw).array() + beta[c]).matrix();
  }
  return y;
}

Batch BatchNorm::backward(const Batch& grad_out) {
  const Eigen::Index hw = static_cast<Eigen::Index>(shape_.height) * shape_.width;
  const auto count = static_cast<double>(grad_out.rows() * hw);
  Batch dx(grad_out.rows(), grad_out.cols());
  for (int c = 0; c < shape_.channels; ++c) {
    const auto dy = grad_out.middleCols(c * hw, hw).array();
    const auto xh = xhat_.middleCols(c * hw, hw).array();
    gamma_grad_[c] += (dy * xh).sum();
    beta_grad_[c] += dy.sum();
    if (used_batch_stats_) {
      const Eigen::ArrayXXd dxhat = dy * gamma[c];
      const double sum_dxhat = dxhat.sum();
      const double sum_dxhat_xhat = (dxhat * xh).sum();
      dx.middleCols(c * hw, hw) =
          ((inv_std_[c] / count) * (count * dxhat - sum_dxhat - xh * sum_dxhat_xhat)).matrix();
    } else {
      dx.middleCols(c * hw, hw) = (dy * (gamma[c] * inv_std_[c])).matrix();
    }
  }
  return dx;
}

void BatchNorm::collect(std::vector<ParamRef>& out) {
  out.push_back({&gamma, &gamma_grad_, false});
  out.push_back({&beta, &beta_grad_, false});
}

void BatchNorm::zero_grad() {
  gamma_grad_.setZero();
  beta_grad_.setZero();
}

// ---------------------------------------------------------------------------
// SignAct

Batch SignAct::forward(const Batch& x, const ForwardContext& ctx) {
  if (ctx.training) x_ = x;
  if (ctx.surrogate) return x.cwiseMax(-1.0).cwiseMin(1.0);
  return x.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

Batch SignAct::backward(const Batch& grad_out) {
  return grad_out.binaryExpr(x_, [](double g, double v) { return binquant::ste_gradient(g, v); });
}

// ---------------------------------------------------------------------------
// MaxPool2

Batch MaxPool2::forward(const Batch& x, const ForwardContext& ctx) {
  if (x.cols() != static_cast<Eigen::Index>(shape_.size())) throw ShapeError("maxpool: input size mismatch");
  const FeatureShape out = output_shape();
  Batch y(x.rows(), static_cast<Eigen::Index>(out.size()));
  rows_ = x.rows();
  if (ctx.training) argmax_.assign(static_cast<std::size_t>(x.rows()), std::vector<Eigen::Index>(out.size()));
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    for (int c = 0; c < shape_.channels; ++c) {
      for (int oy = 0; oy < out.height; ++oy) {
        for (int ox = 0; ox < out.width; ++ox) {
          Eigen::Index best = (c * shape_.height + 2 * oy) * shape_.width + 2 * ox;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const Eigen::Index idx = (c * shape_.height + 2 * oy + dy) * shape_.width + 2 * ox + dx;
              if (x(b, idx) > x(b, best)) best = idx;
            }
          }
          const Eigen::Index o = (c * out.height + oy) * out.width + ox;
          y(b, o) = x(b, best);
          if (ctx.training) argmax_[static_cast<std::size_t>(b)][static_cast<std::size_t>(o)] = best;
        }
      }
    }
  }
  return y;
}

Batch MaxPool2::backward(const Batch& grad_out) {
  Batch dx = Batch::Zero(grad_out.rows(), static_cast<Eigen::Index>(shape_.size()));
  for (Eigen::Index b = 0; b < grad_out.rows(); ++b) {
    const auto& am = argmax_[static_cast<std::size_t>(b)];
    for (std::size_t o = 0; o < am.size(); ++o) dx(b, am[o]) += grad_out(b, static_cast<Eigen::Index>(o));
  }
  return dx;
}

}  // namespace sbnn::nn
