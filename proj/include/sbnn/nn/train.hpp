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
#include <iosfwd>
#include <string>
#include <vector>

#include "sbnn/dataio.hpp"
#include "sbnn/nn/network.hpp"

namespace sbnn::nn {

class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  /// Fraction of the total loss carried by the sparsity penalty; 0 disables it.
  double gamma = 0.0;
  /// Expected fraction of ones (EC); target sparsity s maps to EC = 1 - s.
  double ec = 1.0;
  std::uint64_t seed = 1;
  OmegaMode omega_mode = OmegaMode::Analytic;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool cosine = true;
  bool augment = false;

  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double task_loss = 0.0;      // mean cross-entropy over the epoch's steps
  double penalty = 0.0;        // j at the end of the epoch
  double lambda = 0.0;         // mean lambda over the epoch's steps
  double ones_fraction = 0.0;  // binarized weights at +1, end of epoch
  double train_accuracy = 0.0; // eval mode, whole training set
  double val_accuracy = -1.0;  // -1 when no validation set is given
  double best_loss = 0.0;      // running minimum of task_loss

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::string snapshot_id;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, double beta1, double beta2, double eps);
  void step(double lr);

 private:
  std::vector<ParamRef> params_;
  std::vector<Eigen::VectorXd> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Trains `net` in place. Deterministic for a given config and dataset.
/// Throws DivergenceError when the loss becomes non-finite.
TrainReport train(Network& net, const dataio::Dataset& data, const TrainConfig& cfg,
                  const dataio::Dataset* validation = nullptr, std::ostream* log = nullptr);

double accuracy(Network& net, const dataio::Dataset& data);

/// Tab-separated report: a header line, then one line per epoch with columns
/// epoch, loss, j, lambda, ones, train_acc, val_acc, best_loss. A final
/// "# snapshot <id>" line closes the file.
void write_report(std::ostream& out, const TrainReport& report);

}  // namespace sbnn::nn
