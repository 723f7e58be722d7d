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

#include "sbnn/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <ostream>

#include "sbnn/nn/snapshot.hpp"

namespace sbnn::nn {

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size <= 0) throw ValidationError("batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
  if (!(ec >= 0.0 && ec <= 1.0)) throw ValidationError("expected ones fraction must lie in [0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("adam eps must be positive");
}

Adam::Adam(std::vector<ParamRef> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p.value->size()));
    v_.push_back(Eigen::VectorXd::Zero(p.value->size()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Eigen::VectorXd& g = *params_[i].grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    *params_[i].value -= (lr * (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_)).matrix();
    if (params_[i].clip_unit) *params_[i].value = params_[i].value->cwiseMax(-1.0).cwiseMin(1.0);
  }
}

double accuracy(Network& net, const dataio::Dataset& data) {
  if (data.size() == 0) return 0.0;
  const std::vector<int> pred = predict(net, data.images);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

TrainReport train(Network& net, const dataio::Dataset& data, const TrainConfig& cfg,
                  const dataio::Dataset* validation, std::ostream* log) {
  cfg.validate();
  TrainReport report;
  if (cfg.epochs == 0) {
    report.snapshot_id = snapshot_id(net);
    return report;
  }
  if (data.size() == 0) throw ValidationError("training set is empty");
  if (data.images.cols() != static_cast<Eigen::Index>(net.spec().input.size())) {
    throw ShapeError("training images do not match the network input shape");
  }

  std::mt19937_64 rng(cfg.seed);
  Adam adam(net.params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const PenaltyConfig penalty{cfg.gamma, cfg.ec, -1.0};
  const ForwardContext ctx{true, false};
  const std::size_t n = data.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Batch x;
  std::vector<int> y;
  std::int64_t step = 0;
  double best = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double lambda_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t len = std::min(bs, n - begin);
      x.resize(static_cast<Eigen::Index>(len), data.images.cols());
      y.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        x.row(static_cast<Eigen::Index>(i)) = data.images.row(static_cast<Eigen::Index>(order[begin + i]));
        y[i] = data.labels[order[begin + i]];
      }
      if (cfg.augment) dataio::augment(x, data.shape, rng);

      net.refresh_omegas();
      net.zero_grad();
      const StepResult r = compute_step(net, x, y, penalty, ctx);
      if (!std::isfinite(r.total())) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step));
      }
      const double lr = cfg.cosine ? 0.5 * cfg.learning_rate *
                                         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps))
                                   : cfg.learning_rate;
      adam.step(lr);
      ++step;
      loss_sum += r.task_loss;
      lambda_sum += r.lambda;
    }
    net.refresh_omegas();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.task_loss = loss_sum / static_cast<double>(steps_per_epoch);
    rec.lambda = lambda_sum / static_cast<double>(steps_per_epoch);
    const std::size_t nb = net.binarized_weight_count();
    rec.ones_fraction = nb ? net.ones_fraction() : 0.0;
    rec.penalty = nb ? std::max(0.0, rec.ones_fraction - cfg.ec) : 0.0;
    rec.train_accuracy = accuracy(net, data);
    if (validation) rec.val_accuracy = accuracy(net, *validation);
    best = std::min(best, rec.task_loss);
    rec.best_loss = best;
    report.epochs.push_back(rec);
    if (log) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "epoch %d loss %.5f j %.5f lambda %.5f ones %.4f train_acc %.4f val_acc %.4f\n",
                    rec.epoch, rec.task_loss, rec.penalty, rec.lambda, rec.ones_fraction,
                    rec.train_accuracy, rec.val_accuracy);
      *log << line << std::flush;
    }
  }
  report.snapshot_id = snapshot_id(net);
  return report;
}

void write_report(std::ostream& out, const TrainReport& report) {
  out << "epoch\tloss\tj\tlambda\tones\ttrain_acc\tval_acc\tbest_loss\n";
  char line[512];
  for (const auto& r : report.epochs) {
    std::snprintf(line, sizeof line, "%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", r.epoch,
                  r.task_loss, r.penalty, r.lambda, r.ones_fraction, r.train_accuracy, r.val_accuracy,
                  r.best_loss);
    out << line;
  }
  out << "# snapshot " << report.snapshot_id << '\n';
}

}  // namespace sbnn::nn
