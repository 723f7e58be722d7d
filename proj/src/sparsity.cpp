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

#include "sbnn/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sbnn::sparsity {

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("binary_entropy: p outside [0, 1]: " + std::to_string(p));
  }
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double inverse_binary_entropy(double h_star) {
  if (!(h_star >= 0.0 && h_star <= 1.0)) {
    throw ValidationError("inverse_binary_entropy: h* outside [0, 1]: " +
                          std::to_string(h_star));
  }
  if (h_star == 0.0) return 0.0;
  if (h_star == 1.0) return 0.5;
  // h is strictly increasing on [0, 1/2].
  double lo = 0.0;
  double hi = 0.5;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (binary_entropy(mid) < h_star) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SparsityBudget make_budget(double h_star, std::size_t n) {
  if (n == 0) throw ValidationError("make_budget: N must be >= 1");
  SparsityBudget b;
  b.h_star = h_star;
  b.n = n;
  b.p_star = inverse_binary_entropy(h_star);
  b.m = static_cast<double>(n) * b.p_star;
  b.ec = b.p_star;
  return b;
}

SparsityBudget budget_from_sparsity(double sparsity, std::size_t n) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ValidationError("sparsity must lie in [0, 1)");
  }
  if (n == 0) throw ValidationError("budget_from_sparsity: N must be >= 1");
  SparsityBudget b;
  b.n = n;
  b.ec = 1.0 - sparsity;
  b.p_star = b.ec;
  b.m = static_cast<double>(n) * b.ec;
  // Above one half the entropy constraint is vacuous; report the entropy at the
  // folded fraction so h_star stays meaningful.
  b.h_star = binary_entropy(b.ec <= 0.5 ? b.ec : 1.0 - b.ec);
  return b;
}

double penalty_g(std::size_t ones, std::size_t n, double ec) {
  if (n == 0) throw ValidationError("penalty over zero weights");
  const double frac = static_cast<double>(ones) / static_cast<double>(n);
  return std::max(0.0, frac - ec);
}

double penalty_g(const ZeroOneWeights& bits, double ec) {
  std::size_t ones = 0;
  for (Eigen::Index i = 0; i < bits.size(); ++i) ones += bits[i];
  return penalty_g(ones, static_cast<std::size_t>(bits.size()), ec);
}

double penalty_j(const SignWeights& wb, double ec) {
  std::size_t ones = 0;
  for (Eigen::Index i = 0; i < wb.size(); ++i) ones += wb[i] > 0 ? 1 : 0;
  return penalty_g(ones, static_cast<std::size_t>(wb.size()), ec);
}

double lambda_update(double loss_bnn, double j_value, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ValidationError("gamma must lie in [0, 1)");
  }
  if (!(loss_bnn >= 0.0)) throw ValidationError("task loss must be non-negative");
  if (j_value <= kPenaltyEpsilon || gamma == 0.0) return 0.0;
  return gamma * loss_bnn / ((1.0 - gamma) * j_value);
}

}  // namespace sbnn::sparsity
