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

#include "sbnn/nn/network.hpp"

#include <algorithm>
#include <cmath>

#include "sbnn/sparsity.hpp"

namespace sbnn::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::Linear: return "linear";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::SignAct: return "sign";
    case LayerKind::Pool: return "maxpool";
    case LayerKind::Classifier: return "classifier";
  }
  return "sign";
}

LayerKind parse_layer_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv3x3, LayerKind::Linear, LayerKind::BatchNorm, LayerKind::SignAct,
                      LayerKind::Pool, LayerKind::Classifier}) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown layer kind '" + s + "'");
}

NetworkSpec desk_convnet(FeatureShape input, int classes, int stem_width,
                         const std::vector<int>& binary_widths, OmegaMode mode) {
  NetworkSpec spec;
  spec.input = input;
  spec.layers.push_back({LayerKind::Conv3x3, stem_width, 1, 1, false, mode});
  spec.layers.push_back({LayerKind::BatchNorm});
  spec.layers.push_back({LayerKind::SignAct});
  for (int w : binary_widths) {
    spec.layers.push_back({LayerKind::Conv3x3, w, 1, 1, true, mode});
    spec.layers.push_back({LayerKind::BatchNorm});
    spec.layers.push_back({LayerKind::SignAct});
  }
  if (input.height >= 2 && input.width >= 2) spec.layers.push_back({LayerKind::Pool});
  spec.layers.push_back({LayerKind::Classifier, classes, 1, 0, false, mode});
  return spec;
}

NetworkSpec desk_mlp(int in_features, int classes, const std::vector<int>& hidden, OmegaMode mode) {
  NetworkSpec spec;
  spec.input = {in_features, 1, 1};
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    spec.layers.push_back({LayerKind::Linear, hidden[i], 1, 0, i > 0, mode});
    spec.layers.push_back({LayerKind::BatchNorm});
    spec.layers.push_back({LayerKind::SignAct});
  }
  spec.layers.push_back({LayerKind::Classifier, classes, 1, 0, false, mode});
  return spec;
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.layers.empty() || spec_.layers.back().kind != LayerKind::Classifier) {
    throw ValidationError("network must end with a classifier");
  }
  if (spec_.input.size() == 0) throw ValidationError("network input shape is empty");
  std::mt19937_64 rng(seed);
  FeatureShape shape = spec_.input;
  bool seen_weights = false;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& ls = spec_.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(ls.kind) + "): ";
    const bool weighted = ls.kind == LayerKind::Conv3x3 || ls.kind == LayerKind::Linear ||
                          ls.kind == LayerKind::Classifier;
    if (weighted && !seen_weights && ls.binarized) {
      throw ValidationError(where + "the first weight layer must stay real-valued");
    }
    if (ls.kind == LayerKind::Classifier && (ls.binarized || i + 1 != spec_.layers.size())) {
      throw ValidationError(where + "the classifier must be the last layer and real-valued");
    }
    if (!weighted && ls.binarized) throw ValidationError(where + "only weight layers can be binarized");
    seen_weights = seen_weights || weighted;
    switch (ls.kind) {
      case LayerKind::Conv3x3:
        layers_.push_back(std::make_unique<Conv3x3>(shape, ls.out, ls.stride, ls.padding,
                                                    ls.binarized, ls.omega_mode, rng));
        break;
      case LayerKind::Linear:
      case LayerKind::Classifier:
        if (ls.out <= 0) throw ValidationError(where + "feature count must be positive");
        layers_.push_back(std::make_unique<Linear>(static_cast<int>(shape.size()), ls.out, ls.binarized,
                                                   ls.kind == LayerKind::Classifier, ls.omega_mode, rng));
        break;
      case LayerKind::BatchNorm: layers_.push_back(std::make_unique<BatchNorm>(shape)); break;
      case LayerKind::SignAct: layers_.push_back(std::make_unique<SignAct>(shape)); break;
      case LayerKind::Pool:
        if (shape.height < 2 || shape.width < 2) throw ShapeError(where + "map smaller than 2x2");
        layers_.push_back(std::make_unique<MaxPool2>(shape));
        break;
    }
    shape = layers_.back()->output_shape();
  }
}

int Network::classes() const { return layers_.back()->output_shape().channels; }

Batch Network::forward(const Batch& x, const ForwardContext& ctx) {
  Batch h = x;
  for (auto& l : layers_) h = l->forward(h, ctx);
  return h;
}

Batch Network::backward(const Batch& grad_logits) {
  Batch g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<ParamRef> Network::params() {
  std::vector<ParamRef> out;
  for (auto& l : layers_) l->collect(out);
  return out;
}

void Network::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

std::vector<WeightBlock*> Network::binarized_blocks() {
  std::vector<WeightBlock*> out;
  for (auto& l : layers_) {
    if (WeightBlock* b = l->weights()) out.push_back(b);
  }
  return out;
}

std::size_t Network::binarized_weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    if (const WeightBlock* b = static_cast<const Layer&>(*l).weights()) n += b->size();
  }
  return n;
}

double Network::ones_sum(bool surrogate) const {
  double s = 0.0;
  for (const auto& l : layers_) {
    if (const WeightBlock* b = static_cast<const Layer&>(*l).weights()) {
      s += (b->binarized_values(surrogate).array() + 1.0).sum() / 2.0;
    }
  }
  return s;
}

void Network::refresh_omegas() {
  for (WeightBlock* b : binarized_blocks()) {
    if (b->mode() == OmegaMode::Analytic) b->refresh_omega();
  }
}

LossResult softmax_cross_entropy(const Batch& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ShapeError("logit rows do not match label count");
  }
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  const auto n = static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ShapeError("label outside the classifier range");
    Eigen::Index arg = 0;
    const double m = logits.row(i).maxCoeff(&arg);
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    const double z = e.sum();
    r.loss += (std::log(z) - (logits(i, y) - m)) / n;
    r.grad.row(i) = e / (z * n);
    r.grad(i, y) -= 1.0 / n;
    if (arg == y) ++r.correct;
  }
  return r;
}

namespace {

struct PenaltyTerms {
  double j = 0.0;
  double lambda = 0.0;
  std::size_t n = 0;
};

PenaltyTerms penalty_terms(const Network& net, double task_loss, const PenaltyConfig& cfg, bool surrogate) {
  PenaltyTerms t;
  t.n = net.binarized_weight_count();
  if (t.n == 0) return t;
  t.j = std::max(0.0, net.ones_sum(surrogate) / static_cast<double>(t.n) - cfg.ec);
  t.lambda = cfg.fixed_lambda >= 0.0 ? cfg.fixed_lambda
                                     : sparsity::lambda_update(task_loss, t.j, cfg.gamma);
  return t;
}

}  // namespace

StepResult compute_step(Network& net, const Batch& x, std::span<const int> labels,
                        const PenaltyConfig& penalty, const ForwardContext& ctx) {
  const Batch logits = net.forward(x, ctx);
  const LossResult ce = softmax_cross_entropy(logits, labels);
  const PenaltyTerms t = penalty_terms(net, ce.loss, penalty, ctx.surrogate);
  net.backward(ce.grad);
  // d j / d wbar_i = 1 / (2N) while the budget is exceeded, routed through the STE.
  if (t.lambda > 0.0 && t.j > 0.0) {
    const double coeff = t.lambda / (2.0 * static_cast<double>(t.n));
    for (WeightBlock* b : net.binarized_blocks()) b->add_penalty_gradient(coeff);
  }
  return {ce.loss, t.j, t.lambda, ce.correct};
}

double step_loss(Network& net, const Batch& x, std::span<const int> labels,
                 const PenaltyConfig& penalty, const ForwardContext& ctx) {
  const LossResult ce = softmax_cross_entropy(net.forward(x, ctx), labels);
  const PenaltyTerms t = penalty_terms(net, ce.loss, penalty, ctx.surrogate);
  return ce.loss + t.lambda * t.j;
}

std::vector<int> predict(Network& net, const Batch& x, std::size_t batch_size) {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  const ForwardContext ctx{};
  for (Eigen::Index begin = 0; begin < x.rows(); begin += static_cast<Eigen::Index>(batch_size)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch_size), x.rows() - begin);
    const Batch logits = net.forward(x.middleRows(begin, len), ctx);
    for (Eigen::Index i = 0; i < len; ++i) {
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(begin + i)] = static_cast<int>(arg);
    }
  }
  return out;
}

}  // namespace sbnn::nn
