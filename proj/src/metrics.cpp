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

#include "sbnn/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "sbnn/sparsity.hpp"

namespace sbnn::metrics {

std::uint64_t bops_baseline(std::uint64_t weights, std::uint64_t applications) {
  return 2 * weights * applications;
}

double gain_estimate(double ec) {
  if (!(ec > 0.0 && ec <= 1.0)) throw ValidationError("gain_estimate: EC must lie in (0, 1]");
  return 2.0 / ec;
}

double ops_total(double bops, double flops) {
  if (bops < 0.0 || flops < 0.0) throw ValidationError("ops_total: negative operation count");
  return flops + bops / 64.0;
}

std::uint64_t bparams_bits(std::uint64_t zero, std::uint64_t single, std::uint64_t dense) {
  return 2 * (zero + single + dense) + 4 * single + 9 * dense;
}

std::uint64_t bparams_bits(const KernelCensus& census) {
  return bparams_bits(census.zero, census.single, census.dense);
}

double bops_pruning_ratio(std::uint64_t counted, std::uint64_t baseline) {
  if (baseline == 0) return 0.0;
  return 1.0 - static_cast<double>(counted) / static_cast<double>(baseline);
}

HammingHistogram hamming_histogram(const KernelCensus& census) {
  HammingHistogram h{};
  if (census.total() == 0) return h;
  const auto counts = hamming_counts(census);
  for (std::size_t w = 0; w < h.size(); ++w) {
    h[w] = static_cast<double>(counts[w]) / static_cast<double>(census.total());
  }
  return h;
}

namespace {

std::uint64_t count_ones(const std::vector<std::uint8_t>& bits) {
  return std::accumulate(bits.begin(), bits.end(), std::uint64_t{0});
}

struct Totals {
  std::uint64_t ones = 0;
  std::uint64_t kernels = 0;
  std::uint64_t zero = 0;
  std::uint64_t single = 0;
  std::uint64_t dense = 0;
};

LayerOps layer_ops(const model::Layer& layer, std::size_t index, Totals& totals) {
  LayerOps ops;
  ops.name = "layer" + std::to_string(index);
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, model::BinaryConv>) {
          ops.name += ":bconv";
          ops.binarized = true;
          ops.weights = l.geom.weight_count();
          const std::uint64_t positions = l.geom.positions();
          const KernelCensus census = classify_kernels(l.bits);
          ops.bops_bnn = bops_baseline(ops.weights, positions);
          ops.bops_sbnn = 2 * kKernelTaps * census.dense * positions;
          ops.kernels = census.total();
          ops.k0 = static_cast<double>(census.zero) / static_cast<double>(ops.kernels);
          ops.k1 = static_cast<double>(census.single) / static_cast<double>(ops.kernels);
          ops.kdense = static_cast<double>(census.dense) / static_cast<double>(ops.kernels);
          ops.bparams_bits = bparams_bits(census);
          const std::uint64_t ones = count_ones(l.bits);
          ops.ones_fraction = static_cast<double>(ones) / static_cast<double>(ops.weights);
          totals.ones += ones;
          totals.kernels += census.total();
          totals.zero += census.zero;
          totals.single += census.single;
          totals.dense += census.dense;
        } else if constexpr (std::is_same_v<T, model::BinaryLinear>) {
          ops.name += ":blinear";
          ops.binarized = true;
          ops.weights = l.geom.weight_count();
          ops.bops_bnn = bops_baseline(ops.weights);
          const auto cols = static_cast<std::size_t>(l.geom.in_features);
          std::uint64_t live_rows = 0;
          for (int r = 0; r < l.geom.out_features; ++r) {
            const auto begin = l.bits.begin() + static_cast<std::ptrdiff_t>(r * cols);
            if (std::any_of(begin, begin + static_cast<std::ptrdiff_t>(cols),
                            [](std::uint8_t b) { return b != 0; })) {
              ++live_rows;
            }
          }
          ops.bops_sbnn = 2 * cols * live_rows;
          // Linear layers are stored as one raw bit per weight.
          ops.bparams_bits = ops.weights;
          const std::uint64_t ones = count_ones(l.bits);
          ops.ones_fraction = static_cast<double>(ones) / static_cast<double>(ops.weights);
          totals.ones += ones;
        } else if constexpr (std::is_same_v<T, model::FloatConv>) {
          ops.name += ":conv";
          ops.weights = l.geom.weight_count();
          ops.flops = 2 * ops.weights * l.geom.positions();
        } else if constexpr (std::is_same_v<T, model::FloatLinear>) {
          ops.name += ":linear";
          ops.weights = l.geom.weight_count();
          ops.flops = 2 * ops.weights;
        } else {
          ops.name += ":pool";
        }
      },
      layer);
  if (ops.binarized) {
    ops.bops_pr = bops_pruning_ratio(ops.bops_sbnn, ops.bops_bnn);
    ops.bparams_pr = 1.0 - static_cast<double>(ops.bparams_bits) / static_cast<double>(ops.weights);
    ops.entropy_bits = sparsity::binary_entropy(ops.ones_fraction);
  }
  ops.ops_total = ops_total(static_cast<double>(ops.bops_sbnn), static_cast<double>(ops.flops));
  return ops;
}

void finish_total(OpsReport& report, const Totals& t) {
  LayerOps& tot = report.total;
  tot = LayerOps{};
  tot.name = "total";
  std::uint64_t binary_weights = 0;
  for (const auto& l : report.layers) {
    tot.weights += l.weights;
    tot.bops_bnn += l.bops_bnn;
    tot.bops_sbnn += l.bops_sbnn;
    tot.flops += l.flops;
    tot.bparams_bits += l.bparams_bits;
    if (l.binarized) binary_weights += l.weights;
  }
  tot.binarized = binary_weights > 0;
  tot.kernels = t.kernels;
  if (t.kernels > 0) {
    tot.k0 = static_cast<double>(t.zero) / static_cast<double>(t.kernels);
    tot.k1 = static_cast<double>(t.single) / static_cast<double>(t.kernels);
    tot.kdense = static_cast<double>(t.dense) / static_cast<double>(t.kernels);
  }
  tot.bops_pr = bops_pruning_ratio(tot.bops_sbnn, tot.bops_bnn);
  if (binary_weights > 0) {
    tot.bparams_pr =
        1.0 - static_cast<double>(tot.bparams_bits) / static_cast<double>(binary_weights);
    tot.ones_fraction = static_cast<double>(t.ones) / static_cast<double>(binary_weights);
    tot.entropy_bits = sparsity::binary_entropy(tot.ones_fraction);
  }
  tot.ops_total = ops_total(static_cast<double>(tot.bops_sbnn), static_cast<double>(tot.flops));
}

}  // namespace

OpsReport analyze(const model::QuantizedModel& model) {
  OpsReport report;
  Totals totals;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    report.layers.push_back(layer_ops(model.layers[i], i, totals));
  }
  finish_total(report, totals);
  return report;
}

OpsReport analyze(const model::QuantizedModel& model, const infer::OpsCounters& counters) {
  if (counters.samples == 0 || counters.layers.size() != model.layers.size()) {
    throw ValidationError("analyze: counters do not belong to this model");
  }
  OpsReport report;
  report.samples = counters.samples;
  Totals totals;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    LayerOps ops = layer_ops(model.layers[i], i, totals);
    const infer::LayerCounters& c = counters.layers[i];
    if (ops.binarized) {
      ops.bops_sbnn = c.bops / counters.samples;
      ops.bops_pr = bops_pruning_ratio(ops.bops_sbnn, ops.bops_bnn);
    }
    ops.flops = c.flops / counters.samples;
    ops.ops_total = ops_total(static_cast<double>(ops.bops_sbnn), static_cast<double>(ops.flops));
    report.layers.push_back(std::move(ops));
  }
  finish_total(report, totals);
  return report;
}

namespace {

void write_row(std::ostream& os, const LayerOps& l) {
  os << std::left << std::setw(16) << l.name << std::right << std::setw(10) << l.weights
     << std::setw(14) << l.bops_bnn << std::setw(14) << l.bops_sbnn << std::setw(12) << l.flops
     << std::setw(14) << std::setprecision(6) << l.ops_total << std::fixed << std::setprecision(2)
     << std::setw(9) << 100.0 * l.bops_pr << std::setw(8) << 100.0 * l.k0 << std::setw(8)
     << 100.0 * l.k1 << std::setw(10) << l.bparams_bits << std::setw(10)
     << 100.0 * l.bparams_pr << std::setprecision(4) << std::setw(8) << l.ones_fraction
     << std::setw(9) << l.entropy_bits << std::defaultfloat << '\n';
}

}  // namespace

void write_report(std::ostream& os, const OpsReport& report) {
  os << "# samples " << report.samples << '\n';
  os << std::left << std::setw(16) << "# layer" << std::right << std::setw(10) << "weights"
     << std::setw(14) << "bops_bnn" << std::setw(14) << "bops_sbnn" << std::setw(12) << "flops"
     << std::setw(14) << "ops" << std::setw(9) << "bops_pr%" << std::setw(8) << "K0%"
     << std::setw(8) << "K1%" << std::setw(10) << "bparams" << std::setw(10) << "bpar_pr%"
     << std::setw(8) << "ones" << std::setw(9) << "entropy" << '\n';
  for (const auto& l : report.layers) write_row(os, l);
  write_row(os, report.total);
}

void write_histogram_csv(std::ostream& os, const model::QuantizedModel& model) {
  os << "layer";
  for (int w = 0; w <= kKernelTaps; ++w) os << ",hw" << w;
  os << '\n';
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto* conv = std::get_if<model::BinaryConv>(&model.layers[i]);
    if (!conv) continue;
    const HammingHistogram h = hamming_histogram(classify_kernels(conv->bits));
    os << i;
    for (double f : h) os << ',' << std::setprecision(17) << f;
    os << '\n';
  }
}

}  // namespace sbnn::metrics
