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

#include "sbnn/common.hpp"

namespace sbnn::sparsity {

/// Below this penalty value the constraint counts as satisfied and lambda is 0.
inline constexpr double kPenaltyEpsilon = 1e-12;

/// Entropy budget for a network of `n` weights.
struct SparsityBudget {
  double h_star = 1.0;    // bits per weight
  std::size_t n = 0;
  double p_star = 0.5;    // inverse entropy of h_star, in [0, 1/2]
  double m = 0.0;         // allowed count of 1-bits, n * p_star
  double ec = 0.5;        // expected-connections fraction, m / n
};

struct PenaltyState {
  double gamma = 0.1;
  double lambda = 0.0;
  double j_value = 0.0;
  double ec = 0.5;
};

/// h(p) in bits, with h(0) = h(1) = 0.
double binary_entropy(double p);

/// The p in [0, 1/2] with h(p) = h_star, by bisection.
double inverse_binary_entropy(double h_star);

SparsityBudget make_budget(double h_star, std::size_t n);

/// Budget from a target sparsity s in [0, 1): at most a fraction 1 - s of ones.
SparsityBudget budget_from_sparsity(double sparsity, std::size_t n);

/// ReLU(ones / N - ec) over the concatenation of all binarized layers.
double penalty_g(const ZeroOneWeights& bits, double ec);
double penalty_g(std::size_t ones, std::size_t n, double ec);

/// ReLU(sum((wb + 1) / 2N) - ec); identical to penalty_g((wb + 1) / 2, ec).
double penalty_j(const SignWeights& wb, double ec);

/// Solves gamma = lambda * j / (loss + lambda * j) for lambda.
double lambda_update(double loss_bnn, double j_value, double gamma);

}  // namespace sbnn::sparsity
