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

#include "sbnn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbnn/dataio.hpp"
#include "sbnn/infer.hpp"
#include "sbnn/metrics.hpp"
#include "sbnn/model_io.hpp"
#include "sbnn/nn/quantize.hpp"
#include "sbnn/nn/snapshot.hpp"
#include "sbnn/nn/train.hpp"
#include "sbnn/sparsity.hpp"

namespace sbnn::cli {

namespace {

namespace fs = std::filesystem;

/// Failure carrying its exit code.
struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw Failure{code, message}; }

struct DataFlags {
  std::string cifar;
  std::string idx_images;
  std::string idx_labels;
  bool synthetic = false;
  std::size_t samples = 1024;
  int classes = 4;
  double difficulty = 0.5;
  std::vector<int> shape{3, 8, 8};
  std::uint64_t data_seed = 42;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--data", d.cifar, "CIFAR-10 binary batch file");
  cmd->add_option("--idx-images", d.idx_images, "IDX image file");
  cmd->add_option("--idx-labels", d.idx_labels, "IDX label file");
  cmd->add_flag("--synthetic", d.synthetic, "use the built-in synthetic dataset");
  cmd->add_option("--samples", d.samples, "synthetic sample count")->capture_default_str();
  cmd->add_option("--classes", d.classes, "synthetic class count")->capture_default_str();
  cmd->add_option("--difficulty", d.difficulty, "synthetic noise level")->capture_default_str();
  cmd->add_option("--shape", d.shape, "synthetic image shape C H W")->expected(3)->capture_default_str();
  cmd->add_option("--data-seed", d.data_seed, "synthetic generator seed")->capture_default_str();
}

bool has_data(const DataFlags& d) {
  return d.synthetic || !d.cifar.empty() || !d.idx_images.empty() || !d.idx_labels.empty();
}

dataio::Dataset load_data(const DataFlags& d) {
  const int sources = (d.synthetic ? 1 : 0) + (d.cifar.empty() ? 0 : 1) +
                      ((d.idx_images.empty() && d.idx_labels.empty()) ? 0 : 1);
  if (sources == 0) fail(kConfig, "no dataset: pass --data, --idx-images/--idx-labels or --synthetic");
  if (sources > 1) fail(kConfig, "pass exactly one dataset source");
  try {
    if (d.synthetic) {
      return dataio::synthetic_classification(d.data_seed, d.samples, d.classes, d.difficulty,
                                              {d.shape[0], d.shape[1], d.shape[2]});
    }
    if (!d.cifar.empty()) return dataio::load_cifar10_binary(d.cifar);
    if (d.idx_images.empty() || d.idx_labels.empty()) {
      fail(kConfig, "IDX data needs both --idx-images and --idx-labels");
    }
    return dataio::load_idx(d.idx_images, d.idx_labels);
  } catch (const dataio::DataError& e) {
    fail(kData, e.what());
  } catch (const ValidationError& e) {
    fail(kConfig, e.what());
  }
}

model::QuantizedModel load_model(const std::string& path) {
  try {
    return model_io::load(path);
  } catch (const model_io::ModelIoError& e) {
    fail(kModel, path + ": " + e.what());
  } catch (const Error& e) {
    fail(kModel, e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) fail(kOutput, "cannot write " + path.string());
}

/// The subcommand's resolved options as a config file section.
std::string resolved_config(const CLI::App& cmd) {
  return "[" + cmd.get_name() + "]\n" + cmd.config_to_str(true, false);
}

void log_config(const CLI::App& cmd, std::ostream& err) {
  err << "# resolved config\n" << resolved_config(cmd);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  DataFlags data;
  int epochs = 10;
  int batch = 64;
  double lr = 1e-3;
  double gamma = 0.0;
  std::optional<double> sparsity;
  std::optional<double> hstar;
  std::uint64_t seed = 1;
  std::string omega = "analytic";
  std::string out = "sbnn_out";
  std::string arch = "conv";
  int stem = 8;
  std::vector<int> widths{8};
  double val_fraction = 0.0;
  bool no_cosine = false;
  bool augment = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

int cmd_train(const TrainFlags& f, const CLI::App& app, std::ostream& out, std::ostream& err) {
  nn::TrainConfig cfg;
  try {
    cfg.epochs = f.epochs;
    cfg.batch_size = f.batch;
    cfg.learning_rate = f.lr;
    cfg.gamma = f.gamma;
    cfg.seed = f.seed;
    cfg.omega_mode = nn::parse_omega_mode(f.omega);
    cfg.cosine = !f.no_cosine;
    cfg.augment = f.augment;
    cfg.adam_beta1 = f.beta1;
    cfg.adam_beta2 = f.beta2;
    if (f.sparsity && f.hstar) fail(kConfig, "--sparsity and --hstar are alternatives; pass one");
    if (f.sparsity) {
      if (!(*f.sparsity >= 0.0 && *f.sparsity < 1.0)) fail(kConfig, "--sparsity must lie in [0, 1)");
      cfg.ec = 1.0 - *f.sparsity;
    } else if (f.hstar) {
      cfg.ec = sparsity::inverse_binary_entropy(*f.hstar);
    }
    if (!(f.val_fraction >= 0.0 && f.val_fraction < 1.0)) fail(kConfig, "--val-fraction must lie in [0, 1)");
    if (f.arch != "conv" && f.arch != "mlp") fail(kConfig, "--arch must be conv or mlp");
    cfg.validate();
  } catch (const ValidationError& e) {
    fail(kConfig, e.what());
  }
  log_config(app, err);
  err << "# expected ones fraction (EC) " << fmt("%.6g", cfg.ec) << '\n';

  dataio::Dataset all = load_data(f.data);
  const auto n_val = static_cast<std::size_t>(std::floor(f.val_fraction * static_cast<double>(all.size())));
  dataio::Dataset train_set = all.slice(0, all.size() - n_val);
  std::optional<dataio::Dataset> val_set;
  if (n_val > 0) val_set = all.slice(all.size() - n_val, all.size());

  std::optional<nn::Network> net;
  try {
    const nn::NetworkSpec spec =
        f.arch == "conv"
            ? nn::desk_convnet(all.shape, all.classes, f.stem, f.widths, cfg.omega_mode)
            : nn::desk_mlp(static_cast<int>(all.shape.size()), all.classes, [&] {
                std::vector<int> h{f.stem};
                h.insert(h.end(), f.widths.begin(), f.widths.end());
                return h;
              }(), cfg.omega_mode);
    net.emplace(spec, cfg.seed);
  } catch (const Error& e) {
    fail(kConfig, std::string("architecture: ") + e.what());
  }

  std::error_code ec;
  fs::create_directories(f.out, ec);
  if (ec) fail(kOutput, "cannot create " + f.out + ": " + ec.message());

  nn::TrainReport report;
  try {
    report = nn::train(*net, train_set, cfg, val_set ? &*val_set : nullptr, &err);
  } catch (const nn::DivergenceError& e) {
    fail(kDivergence, e.what());
  } catch (const ShapeError& e) {
    fail(kData, e.what());
  }

  std::ostringstream tsv;
  nn::write_report(tsv, report);
  write_file(fs::path(f.out) / "report.tsv", tsv.str());
  write_file(fs::path(f.out) / "config.ini", resolved_config(app));
  try {
    nn::save_snapshot(*net, fs::path(f.out) / "snapshot.json");
  } catch (const Error& e) {
    fail(kOutput, e.what());
  }
  out << "epochs " << report.epochs.size() << '\n';
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    out << "train_accuracy " << fmt("%.4f", last.train_accuracy) << '\n';
    if (last.val_accuracy >= 0.0) out << "val_accuracy " << fmt("%.4f", last.val_accuracy) << '\n';
    out << "ones_fraction " << fmt("%.4f", last.ones_fraction) << '\n';
  }
  out << "snapshot " << report.snapshot_id << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct QuantizeFlags {
  std::string snapshot;
  std::string omega = "analytic";
  std::string out = "model.sbnn";
};

int cmd_quantize(const QuantizeFlags& f, const CLI::App& app, std::ostream& out, std::ostream& err) {
  nn::OmegaMode mode{};
  try {
    mode = nn::parse_omega_mode(f.omega);
  } catch (const ValidationError& e) {
    fail(kConfig, e.what());
  }
  log_config(app, err);
  std::optional<nn::Network> net;
  try {
    net.emplace(nn::load_snapshot(f.snapshot));
  } catch (const Error& e) {
    fail(kModel, e.what());
  }
  model::QuantizedModel m;
  try {
    m = nn::quantize_snapshot(*net, mode);
  } catch (const ValidationError& e) {
    fail(kModel, e.what());
  }
  try {
    model_io::save(m, f.out);
  } catch (const Error& e) {
    fail(kOutput, e.what());
  }
  out << "layers " << m.layers.size() << '\n';
  out << "payload_bits " << model_io::payload_bits(m) << '\n';
  out << "wrote " << f.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalFlags {
  DataFlags data;
  std::string model;
  int threads = 0;
};

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index arg = 0;
  row.maxCoeff(&arg);
  return static_cast<int>(arg);
}

int cmd_eval(const EvalFlags& f, const CLI::App& app, std::ostream& out, std::ostream& err) {
  log_config(app, err);
  const model::QuantizedModel m = load_model(f.model);
  const dataio::Dataset data = load_data(f.data);
  const infer::SparseEngine engine(m);
  Batch logits;
  try {
    logits = engine.infer_batch(data.images, nullptr, infer::worker_count(f.threads));
  } catch (const ShapeError& e) {
    fail(kData, e.what());
  }
  std::size_t hit = 0;
  std::size_t agree = 0;
  std::size_t identical = 0;
  for (Eigen::Index r = 0; r < data.images.rows(); ++r) {
    const auto row = data.images.row(r);
    const infer::Trace ref =
        nn::reference_forward(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    const Eigen::Map<const Eigen::RowVectorXd> ref_logits(ref.output.data(),
                                                          static_cast<Eigen::Index>(ref.output.size()));
    const int pred = argmax(logits.row(r));
    hit += pred == data.labels[static_cast<std::size_t>(r)] ? 1 : 0;
    agree += pred == argmax(ref_logits) ? 1 : 0;
    identical += logits.row(r) == ref_logits ? 1 : 0;
  }
  const auto n = static_cast<double>(data.size());
  out << "samples " << data.size() << '\n';
  out << "accuracy " << fmt("%.4f", static_cast<double>(hit) / n) << '\n';
  out << "argmax_agreement " << fmt("%.4f", static_cast<double>(agree) / n) << '\n';
  out << "bit_identical_logits " << fmt("%.4f", static_cast<double>(identical) / n) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchFlags {
  DataFlags data;
  std::string model;
  int threads = 0;
  bool no_skip = false;
  std::size_t random_inputs = 64;
  std::string csv;
};

int cmd_bench(const BenchFlags& f, const CLI::App& app, std::ostream& out, std::ostream& err) {
  log_config(app, err);
  const model::QuantizedModel m = load_model(f.model);
  const infer::SparseEngine engine(m, {!f.no_skip});
  Batch inputs;
  if (has_data(f.data)) {
    inputs = load_data(f.data).images;
  } else {
    // Random +-1 inputs feed binarized and real first layers alike.
    std::mt19937_64 rng(f.data.data_seed);
    std::bernoulli_distribution coin(0.5);
    inputs.resize(static_cast<Eigen::Index>(f.random_inputs), static_cast<Eigen::Index>(engine.input_size()));
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = coin(rng) ? 1.0 : -1.0;
  }
  infer::OpsCounters counters;
  try {
    engine.infer_batch(inputs, &counters, infer::worker_count(f.threads));
  } catch (const ShapeError& e) {
    fail(kData, e.what());
  }
  const metrics::OpsReport report = metrics::analyze(m, counters);
  metrics::write_report(out, report);
  std::uint64_t ones = 0;
  std::uint64_t weights = 0;
  for (const auto& layer : m.layers) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, model::BinaryConv> || std::is_same_v<T, model::BinaryLinear>) {
            for (auto b : l.bits) ones += b;
            weights += l.bits.size();
          }
        },
        layer);
  }
  if (weights > 0 && ones > 0) {
    const double ec = static_cast<double>(ones) / static_cast<double>(weights);
    out << "gain_estimate " << fmt("%.4f", metrics::gain_estimate(ec)) << " (EC " << fmt("%.4f", ec) << ")\n";
  } else {
    out << "gain_estimate n/a\n";
  }
  if (!f.csv.empty()) {
    std::ostringstream csv;
    metrics::write_histogram_csv(csv, m);
    write_file(f.csv, csv.str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct InspectFlags {
  std::string model;
  std::string csv;
};

int cmd_inspect(const InspectFlags& f, const CLI::App& app, std::ostream& out, std::ostream& err) {
  log_config(app, err);
  const model::QuantizedModel m = load_model(f.model);
  out << "layer\tkind\talpha\tbeta\ttau\tphi\tp\tentropy_bits\n";
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, model::BinaryConv> || std::is_same_v<T, model::BinaryLinear>) {
            std::uint64_t ones = 0;
            for (auto b : l.bits) ones += b;
            const double p = static_cast<double>(ones) / static_cast<double>(l.bits.size());
            out << i << '\t' << (std::is_same_v<T, model::BinaryConv> ? "binary_conv" : "binary_linear")
                << '\t' << fmt("%.6g", l.omega.alpha()) << '\t' << fmt("%.6g", l.omega.beta()) << '\t'
                << fmt("%.6g", l.omega.tau) << '\t' << fmt("%.6g", l.omega.phi) << '\t' << fmt("%.6f", p)
                << '\t' << fmt("%.6f", sparsity::binary_entropy(p)) << '\n';
          } else {
            const char* kind = std::is_same_v<T, model::FloatConv>     ? "float_conv"
                               : std::is_same_v<T, model::FloatLinear> ? "float_linear"
                                                                       : "maxpool";
            out << i << '\t' << kind << "\t-\t-\t-\t-\t-\t-\n";
          }
        },
        m.layers[i]);
  }
  std::ostringstream csv;
  metrics::write_histogram_csv(csv, m);
  if (f.csv.empty()) {
    out << csv.str();
  } else {
    write_file(f.csv, csv.str());
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse binary neural networks: train, quantize, evaluate and account"};
  app.set_config("--config", "", "key = value file; options of a subcommand go under its [section]");
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "train a network and write report.tsv, snapshot.json");
  add_data_flags(train, tf.data);
  train->add_option("--epochs", tf.epochs)->capture_default_str();
  train->add_option("--batch", tf.batch)->capture_default_str();
  train->add_option("--lr", tf.lr)->capture_default_str();
  train->add_option("--gamma", tf.gamma, "penalty share of the total loss, in [0, 1)")->capture_default_str();
  train->add_option("--sparsity", tf.sparsity, "target sparsity s; EC = 1 - s");
  train->add_option("--hstar", tf.hstar, "entropy budget h*; EC = inverse entropy of h*");
  train->add_option("--seed", tf.seed)->capture_default_str();
  train->add_option("--omega", tf.omega, "analytic | learned | pm1")->capture_default_str();
  train->add_option("--out", tf.out, "output directory")->capture_default_str();
  train->add_option("--arch", tf.arch, "conv | mlp")->capture_default_str();
  train->add_option("--stem", tf.stem, "width of the real first layer")->capture_default_str();
  train->add_option("--widths", tf.widths, "widths of the binarized layers")->capture_default_str();
  train->add_option("--val-fraction", tf.val_fraction, "held-out tail of the dataset")->capture_default_str();
  train->add_flag("--no-cosine", tf.no_cosine, "constant learning rate");
  train->add_flag("--augment", tf.augment, "random flip and shift");
  train->add_option("--beta1", tf.beta1)->capture_default_str();
  train->add_option("--beta2", tf.beta2)->capture_default_str();

  QuantizeFlags qf;
  CLI::App* quantize = app.add_subcommand("quantize", "convert a snapshot into a model file");
  quantize->add_option("--snapshot", qf.snapshot)->required();
  quantize->add_option("--omega", qf.omega, "analytic | learned | pm1")->capture_default_str();
  quantize->add_option("--out", qf.out)->capture_default_str();

  EvalFlags ef;
  CLI::App* eval = app.add_subcommand("eval", "accuracy and agreement with the reference path");
  eval->add_option("--model", ef.model)->required();
  add_data_flags(eval, ef.data);
  eval->add_option("--threads", ef.threads, "worker cap; SBNN_THREADS also applies");

  BenchFlags bf;
  CLI::App* bench = app.add_subcommand("bench", "operation and parameter accounting");
  bench->add_option("--model", bf.model)->required();
  add_data_flags(bench, bf.data);
  bench->add_option("--threads", bf.threads);
  bench->add_flag("--no-skip", bf.no_skip, "run every kernel through the popcount path");
  bench->add_option("--random-inputs", bf.random_inputs, "random +-1 inputs when no data is given")
      ->capture_default_str();
  bench->add_option("--csv", bf.csv, "write the Hamming-weight histogram here");

  InspectFlags inf;
  CLI::App* inspect = app.add_subcommand("inspect", "per-layer domain, density, entropy, histogram");
  inspect->add_option("--model", inf.model)->required();
  inspect->add_option("--csv", inf.csv, "write the histogram here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (train->parsed()) return cmd_train(tf, *train, out, err);
    if (quantize->parsed()) return cmd_quantize(qf, *quantize, out, err);
    if (eval->parsed()) return cmd_eval(ef, *eval, out, err);
    if (bench->parsed()) return cmd_bench(bf, *bench, out, err);
    if (inspect->parsed()) return cmd_inspect(inf, *inspect, out, err);
  } catch (const Failure& f) {
    err << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kConfig;
}

}  // namespace sbnn::cli
