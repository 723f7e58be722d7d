// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance        run every criterion, exit 1 if any fails
//   acceptance N      run criterion N only

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "engine_checks.hpp"
#include "fuzz_models.hpp"
#include "oracles.hpp"
#include "sbnn/binquant.hpp"
#include "sbnn/metrics.hpp"
#include "sbnn/model_io.hpp"
#include "sbnn/nn/quantize.hpp"
#include "sbnn/nn/train.hpp"
#include "sbnn/sparsity.hpp"

namespace {

using namespace sbnn;

// Pinned tolerances.
constexpr double kFitLossTol = 1e-9;
constexpr double kFitGradTol = 1e-9;
constexpr double kGradRelTol = 1e-5;
constexpr double kNetGradTol = 1e-4;
constexpr double kEntropyTol = 1e-10;
constexpr double kGammaRelTol = 1e-12;
// Reference rows carry two decimals; 17/64 + 1.41 = 1.6756 is shown as 1.67.
constexpr double kTableTol = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> to_std(const RealWeights& w) { return {w.data(), w.data() + w.size()}; }
std::vector<int> to_std(const SignWeights& s) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < s.size(); ++i) out.push_back(s[i]);
  return out;
}

RealWeights random_layer(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const double shift = 0.5 * nd(rng);
  const double scale = std::exp(nd(rng));
  RealWeights w(n);
  for (int i = 0; i < n; ++i) w[i] = scale * (nd(rng) + shift);
  return w;
}

// 1. Closed-form optimality.
Outcome closed_form(double& seconds) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> len(2, 64);
  double worst_loss = 0.0, worst_grad = 0.0;
  int layers = 0;
  while (layers < 200) {
    const RealWeights w = random_layer(rng, len(rng));
    const SignWeights s = binquant::sign_binarize(w);
    const auto st = binquant::quant_stats(s);
    if (st.upper == 0 || st.lower == 0) continue;
    ++layers;
    const auto omega = binquant::fit_omega_closed_form(w, s);
    const auto bf = oracle::brute_force_fit(to_std(w), to_std(s));
    const double lo = oracle::recon_loss(to_std(w), to_std(s), bf.first, bf.second);
    const double lc = binquant::binarization_loss(w, s, omega);
    worst_loss = std::max(worst_loss, std::abs(lc - lo));
    const auto g = binquant::grad_binarization_loss(w, s, omega);
    worst_grad = std::max({worst_grad, std::abs(g.dtau), std::abs(g.dphi)});
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst_loss <= kFitLossTol && worst_grad <= kFitGradTol && seconds < 10.0,
          "200 layers, max |L - L_oracle| " + fmt("%.2e", worst_loss) + ", max |grad| " + fmt("%.2e", worst_grad)};
}

// 2. Gradient suite.
Outcome gradients(double& seconds) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2002);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 64);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const RealWeights w = random_layer(rng, len(rng));
    const SignWeights s = binquant::sign_binarize(w);
    const binquant::OmegaParams o{nd(rng), nd(rng)};
    const auto g = binquant::grad_binarization_loss(w, s, o);
    const double h = 1e-6;
    auto loss = [&](double t, double p) { return binquant::binarization_loss(w, s, binquant::OmegaParams{t, p}); };
    const double ft = (loss(o.tau + h, o.phi) - loss(o.tau - h, o.phi)) / (2 * h);
    const double fp = (loss(o.tau, o.phi + h) - loss(o.tau, o.phi - h)) / (2 * h);
    worst = std::max({worst, std::abs(g.dtau - ft) / std::max(1.0, std::abs(ft)),
                      std::abs(g.dphi - fp) / std::max(1.0, std::abs(fp))});
  }

  // Network: surrogate forward (hardtanh for sign) so finite differences see
  // the same derivative the clipped estimator uses; lambda held fixed.
  nn::NetworkSpec spec;
  spec.input = {2, 4, 4};
  using nn::LayerKind;
  const auto mode = nn::OmegaMode::Learned;
  spec.layers = {{LayerKind::Conv3x3, 3, 1, 1, false, mode}, {LayerKind::BatchNorm}, {LayerKind::SignAct},
                 {LayerKind::Conv3x3, 4, 1, 1, true, mode},  {LayerKind::BatchNorm}, {LayerKind::SignAct},
                 {LayerKind::Linear, 4, 1, 0, true, mode},   {LayerKind::BatchNorm}, {LayerKind::SignAct},
                 {LayerKind::Classifier, 3, 1, 0, false, mode}};
  nn::Network net(spec, 5);
  Batch x(8, 32);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
  const nn::ForwardContext ctx{true, true};
  const nn::PenaltyConfig pen{0.0, 0.0, 0.7};
  net.zero_grad();
  nn::compute_step(net, x, y, pen, ctx);
  std::size_t params = 0;
  double worst_net = 0.0;
  for (const nn::ParamRef& p : net.params()) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      ++params;
      const double keep = (*p.value)[i];
      const double h = 1e-6;
      (*p.value)[i] = keep + h;
      const double up = nn::step_loss(net, x, y, pen, ctx);
      (*p.value)[i] = keep - h;
      const double down = nn::step_loss(net, x, y, pen, ctx);
      (*p.value)[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst_net = std::max(worst_net, std::abs(fd - (*p.grad)[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst <= kGradRelTol && worst_net <= kNetGradTol && params <= 500 && seconds < 60.0,
          "L_B worst rel " + fmt("%.2e", worst) + " over 100; network " + std::to_string(params) +
              " params worst " + fmt("%.2e", worst_net)};
}

// 3. Entropy budget.
Outcome entropy_budget(double& seconds) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 1; i <= 5000; ++i) {
    const double p = 0.5 * i / 5000.0;
    worst = std::max(worst, std::abs(sparsity::inverse_binary_entropy(sparsity::binary_entropy(p)) - p));
    const double h = i / 5000.0;
    worst = std::max(worst, std::abs(sparsity::binary_entropy(sparsity::inverse_binary_entropy(h)) - h));
  }
  const double newton_m = 1000.0 * oracle::inverse_entropy_newton(0.5);
  const double m = sparsity::make_budget(0.5, 1000).m;
  const bool m_ok = std::abs(m - newton_m) < 1e-9 && std::round(m * 100.0) / 100.0 == 110.03;

  std::size_t patterns = 0, wrong = 0;
  for (double h : {0.25, 0.5, 1.0}) {
    for (std::size_t n = 1; n <= 20; ++n) {
      const sparsity::SparsityBudget b = sparsity::make_budget(h, n);
      ZeroOneWeights bits(static_cast<Eigen::Index>(n));
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::size_t u = 0;
        for (std::size_t i = 0; i < n; ++i) {
          bits[static_cast<Eigen::Index>(i)] = (mask >> i) & 1u;
          u += (mask >> i) & 1u;
        }
        ++patterns;
        const bool free = sparsity::penalty_g(bits, b.ec) == 0.0;
        if (free != (static_cast<double>(u) <= b.m)) ++wrong;
      }
    }
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst <= kEntropyTol && m_ok && wrong == 0,
          "round trip " + fmt("%.1e", worst) + ", M " + fmt("%.6f", m) + ", " + std::to_string(patterns) +
              " patterns with " + std::to_string(wrong) + " violations"};
}

// 4. Lambda modulation.
Outcome lambda_modulation(double& seconds) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> loss(1e-3, 20.0), j(1e-9, 1.0), g(1e-9, 1.0 - 1e-9);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double l = loss(rng), jj = j(rng), gg = g(rng);
    const double lam = sparsity::lambda_update(l, jj, gg);
    worst = std::max(worst, std::abs(lam * jj / (l + lam * jj) - gg) / gg);
  }
  const bool zeros = sparsity::lambda_update(1.3, 0.4, 0.0) == 0.0 && sparsity::lambda_update(1.3, 0.0, 0.4) == 0.0;
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst <= kGammaRelTol && zeros, "1000 triples worst rel " + fmt("%.2e", worst) +
                                              (zeros ? ", zero branches ok" : ", zero branches broken")};
}

// 5. Sparse engine bit-exactness.
Outcome engine_exactness(double& seconds) {
  const auto t0 = Clock::now();
  const check::EngineAgreement r = check::fuzz_engine(5005, 100, 100);
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  std::string d = std::to_string(r.runs) + " runs, pre-activation mismatches " + std::to_string(r.preact_mismatch) +
                  ", sign " + std::to_string(r.sign_mismatch) + ", skip " + std::to_string(r.skip_mismatch);
  if (!r.first_failure.empty()) d += " (" + r.first_failure + ")";
  return {r.ok() && r.runs == 10000 && seconds < 60.0, d};
}

// 6. Threshold fusion.
Outcome threshold_fusion(double& seconds) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(6006);
  std::size_t decisions = 0, mismatches = 0;
  for (std::size_t fan_in : {1u, 9u, 18u, 27u, 64u, 72u, 144u, 288u, 576u, 1024u}) {
    const check::ThresholdSweep s = check::sweep_threshold(rng, fan_in, 4);
    decisions += s.decisions;
    mismatches += s.mismatches;
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {mismatches == 0, std::to_string(decisions) + " decisions up to fan-in 1024, " +
                               std::to_string(mismatches) + " mismatches"};
}

// 7. Accounting.
Outcome accounting(double& seconds) {
  const auto t0 = Clock::now();
  const double row1 = metrics::ops_total(17e8, 1.41e8) / 1e8;
  const double row2 = metrics::ops_total(48e8, 0.12e8) / 1e8;
  const bool rows = std::abs(row1 - 1.67) <= kTableTol && std::abs(row2 - 0.87) <= kTableTol;
  const bool gain = metrics::gain_estimate(0.05) == 40.0;
  std::mt19937_64 rng(7007);
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t kernels = 1 + rng() % 500;
    const std::vector<std::uint8_t> bits = fuzz::random_bits(rng, kernels * 9);
    std::uint64_t s = 0, d = 0;
    for (std::size_t k = 0; k < kernels; ++k) {
      int hw = 0;
      for (int i = 0; i < 9; ++i) hw += bits[k * 9 + static_cast<std::size_t>(i)];
      s += hw == 1;
      d += hw >= 2;
    }
    if (metrics::bparams_bits(classify_kernels(bits)) != 2 * kernels + 4 * s + 9 * d) ++bad;
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {rows && gain && bad == 0, "rows " + fmt("%.4f", row1) + " / " + fmt("%.4f", row2) +
                                        " (reference 1.67 / 0.87), gain(0.05) " + fmt("%g", metrics::gain_estimate(0.05)) +
                                        ", bparams mismatches " + std::to_string(bad) + "/1000"};
}

// 8. Desk-scale training.
struct RunSummary {
  double train_accuracy = 0.0;
  double ones = 0.0;
  double k0 = 0.0;
};

RunSummary train_once(const dataio::Dataset& data, double gamma, double ec) {
  const nn::NetworkSpec spec = nn::desk_convnet(data.shape, data.classes, 8, {8, 8}, nn::OmegaMode::Analytic);
  nn::Network net(spec, 7);
  nn::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 64;
  cfg.learning_rate = 3e-3;
  cfg.gamma = gamma;
  cfg.ec = ec;
  cfg.seed = 3;
  const nn::TrainReport r = nn::train(net, data, cfg);
  const model::QuantizedModel m = nn::quantize_snapshot(net, nn::OmegaMode::Analytic);
  const metrics::OpsReport ops = metrics::analyze(m);
  return {r.epochs.back().train_accuracy, ops.total.ones_fraction, ops.total.k0};
}

Outcome training(double& seconds) {
  const auto t0 = Clock::now();
  const dataio::Dataset data = dataio::synthetic_classification(42, 1024, 4, 0.5, {3, 8, 8});
  const RunSummary a = train_once(data, 0.0, 1.0);
  const RunSummary b = train_once(data, 0.1, 0.05);
  // Not part of the verdict: a larger penalty share on the same setup.
  const RunSummary c = train_once(data, 0.5, 0.05);
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool pa = a.train_accuracy >= 0.95;
  const bool pb = b.ones <= 0.06;
  const bool pc = a.train_accuracy - b.train_accuracy <= 0.10;
  const bool pd = b.k0 > a.k0;
  auto mark = [](bool ok) { return ok ? "ok" : "FAIL"; };
  const std::string d = std::string("(a) acc ") + fmt("%.4f", a.train_accuracy) + " " + mark(pa) + "; (b) ones " +
                        fmt("%.4f", b.ones) + " " + mark(pb) + "; (c) drop " +
                        fmt("%.4f", a.train_accuracy - b.train_accuracy) + " " + mark(pc) + "; (d) K0 " +
                        fmt("%.4f", b.k0) + " vs " + fmt("%.4f", a.k0) + " " + mark(pd) +
                        "; info: gamma 0.5 gives ones " + fmt("%.4f", c.ones) + ", acc " + fmt("%.4f", c.train_accuracy);
  return {pa && pb && pc && pd && seconds < 600.0, d};
}

// 9. Serialization.
Outcome serialization(double& seconds) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(9009);
  std::size_t bad_rt = 0, bad_bits = 0;
  for (int k = 0; k < 1000; ++k) {
    const model::QuantizedModel m = fuzz::random_model(rng);
    const auto bytes = model_io::encode(m);
    const model::QuantizedModel back = model_io::decode(bytes);
    if (!(back == m) || model_io::encode(back) != bytes) ++bad_rt;
    std::uint64_t hand = 0;
    for (const auto& layer : m.layers) {
      if (const auto* c = std::get_if<model::BinaryConv>(&layer)) {
        const std::size_t kernels = c->bits.size() / 9;
        std::uint64_t s = 0, d = 0;
        for (std::size_t q = 0; q < kernels; ++q) {
          int hw = 0;
          for (int i = 0; i < 9; ++i) hw += c->bits[q * 9 + static_cast<std::size_t>(i)];
          s += hw == 1;
          d += hw >= 2;
        }
        hand += 2 * kernels + 4 * s + 9 * d;
      } else if (const auto* l = std::get_if<model::BinaryLinear>(&layer)) {
        hand += l->bits.size();
      }
    }
    const std::uint64_t payload = model_io::payload_bits(m);
    if (payload != metrics::analyze(m).total.bparams_bits || payload != hand) ++bad_bits;
  }
  seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return {bad_rt == 0 && bad_bits == 0, "1000 models, round-trip failures " + std::to_string(bad_rt) +
                                            ", payload/bparams mismatches " + std::to_string(bad_bits)};
}

struct Criterion {
  const char* name;
  std::function<Outcome(double&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"closed-form optimality", closed_form},   {"gradient suite", gradients},
      {"entropy budget", entropy_budget},        {"lambda modulation", lambda_modulation},
      {"sparse-engine bit-exactness", engine_exactness}, {"threshold fusion", threshold_fusion},
      {"accounting reproduction", accounting},   {"desk-scale training", training},
      {"serialization", serialization},
  };
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > static_cast<int>(all.size())) {
      std::fprintf(stderr, "usage: %s [1-%zu]\n", argv[0], all.size());
      return 2;
    }
  }
  bool ok = true;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    double seconds = 0.0;
    Outcome o;
    try {
      o = all[i].run(seconds);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, o.detail.c_str(), seconds);
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
