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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbnn/infer.hpp"
#include "sbnn/kernels.hpp"
#include "sbnn/model.hpp"

/// Operation and parameter accounting.
///
/// Conventions: a dense BNN spends one XNOR and one popcount per weight
/// position (2 BOPs); a real multiply-accumulate is 2 FLOPs; batchnorm is
/// folded and free; OPs = FLOPs + BOPs / 64.
namespace sbnn::metrics {

/// 2 * weights * applications.
std::uint64_t bops_baseline(std::uint64_t weights, std::uint64_t applications = 1);

/// Rough BNN-over-SBNN speed-up, 2 / EC.
double gain_estimate(double ec);

double ops_total(double bops, double flops);

/// 2 bits of class per kernel, 4 index bits per single-one kernel, 9 raw bits
/// per dense kernel.
std::uint64_t bparams_bits(std::uint64_t zero, std::uint64_t single, std::uint64_t dense);
std::uint64_t bparams_bits(const KernelCensus& census);

/// 1 - counted / baseline.
double bops_pruning_ratio(std::uint64_t counted, std::uint64_t baseline);

using HammingHistogram = std::array<double, 10>;

/// Fractions of kernels at each Hamming weight 0..9; sums to 1.
HammingHistogram hamming_histogram(const KernelCensus& census);

struct LayerOps {
  std::string name;
  bool binarized = false;
  std::uint64_t weights = 0;
  std::uint64_t bops_bnn = 0;
  std::uint64_t bops_sbnn = 0;
  std::uint64_t flops = 0;
  double ops_total = 0.0;
  double bops_pr = 0.0;
  std::uint64_t kernels = 0;  // 3x3 kernels; 0 for non-conv layers
  double k0 = 0.0;
  double k1 = 0.0;
  double kdense = 0.0;
  std::uint64_t bparams_bits = 0;
  double bparams_pr = 0.0;
  double ones_fraction = 0.0;
  double entropy_bits = 0.0;
};

struct OpsReport {
  std::vector<LayerOps> layers;
  LayerOps total;
  std::uint64_t samples = 1;
};

/// Static per-sample accounting from the kernel census alone.
OpsReport analyze(const model::QuantizedModel& model);

/// Accounting from counters collected by SparseEngine; BOPs and FLOPs come from
/// the executed operations, normalized per sample.
OpsReport analyze(const model::QuantizedModel& model, const infer::OpsCounters& counters);

void write_report(std::ostream& os, const OpsReport& report);

/// One row per binarized conv layer: layer,hw0,...,hw9.
void write_histogram_csv(std::ostream& os, const model::QuantizedModel& model);

}  // namespace sbnn::metrics
