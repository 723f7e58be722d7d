#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sbnn/infer.hpp"
#include "sbnn/nn/quantize.hpp"
#include "sbnn/nn/snapshot.hpp"
#include "sbnn/nn/train.hpp"

namespace {

using namespace sbnn;
using namespace sbnn::nn;

Batch random_batch(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Batch x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

std::vector<double> row(const Batch& x, Eigen::Index r) { return {x.row(r).begin(), x.row(r).end()}; }

TEST(LinearLayer, BinarySignProduct) {
  std::mt19937_64 rng(1);
  Linear lin(2, 2, true, false, OmegaMode::FixedPM1, rng);
  lin.block().latent() << 0.5, -0.5, -0.5, -0.5;  // rows [+1,-1] and [-1,-1]
  Batch x(1, 2);
  x << 1.0, 1.0;
  const Batch y = lin.forward(x, {});
  EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(0, 1), -2.0);
}

TEST(ConvLayer, AllOnes) {
  std::mt19937_64 rng(1);
  Conv3x3 conv({1, 3, 3}, 1, 1, 0, true, OmegaMode::FixedPM1, rng);
  conv.block().latent().setConstant(0.3);
  const Batch y = conv.forward(Batch::Ones(1, 9), {});
  ASSERT_EQ(y.cols(), 1);
  EXPECT_DOUBLE_EQ(y(0, 0), 9.0);
}

TEST(ConvLayer, MatchesNaiveLoops) {
  std::mt19937_64 rng(2);
  for (bool binarized : {false, true}) {
    for (int stride : {1, 2}) {
      for (int pad : {0, 1}) {
        Conv3x3 conv({3, 5, 6}, 4, stride, pad, binarized, OmegaMode::Analytic, rng);
        const Batch x = random_batch(rng, 2, 90);
        const Batch y = conv.forward(x, {});
        const Eigen::VectorXd w = conv.block().effective(false);
        const std::vector<double> wv(w.data(), w.data() + w.size());
        for (Eigen::Index r = 0; r < 2; ++r) {
          const auto want = oracle::naive_conv(row(x, r), wv, 3, 4, 5, 6, stride, pad, binarized ? -1.0 : 0.0);
          ASSERT_EQ(static_cast<std::size_t>(y.cols()), want.size());
          for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(y(r, static_cast<Eigen::Index>(k)), want[k], 1e-12);
        }
      }
    }
  }
}

TEST(BatchNormLayer, TrainAndEvalStatistics) {
  BatchNorm bn({2, 1, 2});
  Batch x(2, 4);
  x << 1, 3, 10, 10, 5, 7, 20, 30;
  const Batch y = bn.forward(x, {true, false});
  // Channel 0 values {1, 3, 5, 7}: mean 4, biased var 5.
  EXPECT_NEAR(y(0, 0), (1 - 4) / std::sqrt(5 + 1e-5), 1e-12);
  EXPECT_NEAR(bn.running_mean[0], 0.4, 1e-12);
  // Running variance tracks the unbiased estimate 20 / 3.
  EXPECT_NEAR(bn.running_var[0], 0.9 + 0.1 * 20.0 / 3.0, 1e-12);
  const Batch e = bn.forward(x, {});
  EXPECT_NEAR(e(0, 0), (1 - 0.4) / std::sqrt(bn.running_var[0] + 1e-5), 1e-12);
}

TEST(SignLayer, TiesAndMask) {
  SignAct s({3, 1, 1});
  Batch x(1, 3);
  x << 0.0, -0.5, 2.0;
  const Batch y = s.forward(x, {true, false});
  EXPECT_EQ(y(0, 0), 1.0);
  EXPECT_EQ(y(0, 1), -1.0);
  const Batch g = s.backward(Batch::Ones(1, 3));
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(0, 1), 1.0);
  EXPECT_EQ(g(0, 2), 0.0);
}

TEST(NetworkSpec, Rules) {
  NetworkSpec bad = desk_convnet({1, 4, 4}, 2, 4, {4}, OmegaMode::Analytic);
  bad.layers.front().binarized = true;
  EXPECT_THROW(Network(bad, 1), ValidationError);
  NetworkSpec bad_head = desk_convnet({1, 4, 4}, 2, 4, {4}, OmegaMode::Analytic);
  bad_head.layers.back().binarized = true;
  EXPECT_THROW(Network(bad_head, 1), ValidationError);
  NetworkSpec no_head = desk_convnet({1, 4, 4}, 2, 4, {4}, OmegaMode::Analytic);
  no_head.layers.pop_back();
  EXPECT_THROW(Network(no_head, 1), ValidationError);
  EXPECT_NO_THROW(Network(desk_mlp(10, 3, {8, 8}, OmegaMode::Learned), 1));
}

/// Small stack with every layer type that carries gradients: under 500 parameters.
NetworkSpec gradient_spec(OmegaMode mode) {
  NetworkSpec s;
  s.input = {2, 4, 4};
  s.layers = {{LayerKind::Conv3x3, 3, 1, 1, false, mode}, {LayerKind::BatchNorm}, {LayerKind::SignAct},
              {LayerKind::Conv3x3, 4, 1, 1, true, mode},  {LayerKind::BatchNorm}, {LayerKind::SignAct},
              {LayerKind::Linear, 4, 1, 0, true, mode},   {LayerKind::BatchNorm}, {LayerKind::SignAct},
              {LayerKind::Classifier, 3, 1, 0, false, mode}};
  return s;
}

struct FdResult {
  std::size_t checked = 0;
  double worst = 0.0;
};

FdResult finite_difference_check(OmegaMode mode) {
  Network net(gradient_spec(mode), 5);
  std::mt19937_64 rng(6);
  const Batch x = random_batch(rng, 8, 32);
  const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
  const ForwardContext ctx{true, true};
  const PenaltyConfig pen{0.0, 0.0, 0.7};
  net.zero_grad();
  compute_step(net, x, y, pen, ctx);
  std::size_t count = 0;
  for (const ParamRef& p : net.params()) count += static_cast<std::size_t>(p.value->size());
  EXPECT_LE(count, 500u);

  FdResult r;
  const double h = 1e-6;
  for (const ParamRef& p : net.params()) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      const double keep = (*p.value)[i];
      (*p.value)[i] = keep + h;
      const double up = step_loss(net, x, y, pen, ctx);
      (*p.value)[i] = keep - h;
      const double down = step_loss(net, x, y, pen, ctx);
      (*p.value)[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(fd - (*p.grad)[i]) / std::max(1.0, std::abs(fd));
      r.worst = std::max(r.worst, err);
      ++r.checked;
    }
  }
  return r;
}

TEST(Gradients, LatentWeightsMatchFiniteDifferences) {
  const FdResult r = finite_difference_check(OmegaMode::Analytic);
  EXPECT_GT(r.checked, 300u);
  EXPECT_LT(r.worst, 1e-4);
}

TEST(Gradients, LearnedDomainMatchesFiniteDifferences) {
  const FdResult r = finite_difference_check(OmegaMode::Learned);
  EXPECT_LT(r.worst, 1e-4);
}

TEST(Gradients, PenaltyPushesOnlyInsideWindow) {
  Network net(gradient_spec(OmegaMode::Analytic), 3);
  WeightBlock* b = net.binarized_blocks().front();
  b->latent()[0] = 1.5;
  b->zero_grad();
  b->add_penalty_gradient(0.25);
  EXPECT_EQ(b->latent_grad()[0], 0.0);
  EXPECT_EQ(b->latent_grad()[1], 0.25);
}

dataio::Dataset small_data(std::size_t n = 256) {
  return dataio::synthetic_classification(42, n, 4, 0.5, {3, 6, 6});
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  c.seed = 9;
  return c;
}

TEST(Training, ZeroEpochsIsEmpty) {
  Network net(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 1);
  const std::string before = snapshot_id(net);
  const TrainReport r = train(net, small_data(), quick_config(0));
  EXPECT_TRUE(r.epochs.empty());
  EXPECT_EQ(r.snapshot_id, before);
}

TEST(Training, RejectsBadConfig) {
  Network net(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 1);
  TrainConfig c = quick_config(1);
  c.gamma = 1.0;
  EXPECT_THROW(train(net, small_data(), c), ValidationError);
  c.gamma = 0.1;
  c.ec = 1.5;
  EXPECT_THROW(train(net, small_data(), c), ValidationError);
}

TEST(Training, Deterministic) {
  const auto data = small_data();
  Network a(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 1);
  Network b(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 1);
  TrainConfig c = quick_config(2);
  c.gamma = 0.2;
  c.ec = 0.1;
  const TrainReport ra = train(a, data, c);
  const TrainReport rb = train(b, data, c);
  EXPECT_EQ(ra, rb);
  std::ostringstream sa, sb;
  write_report(sa, ra);
  write_report(sb, rb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().rfind("epoch\tloss\tj\tlambda", 0), 0u);
}

TEST(Training, BinaryNetworkLearns) {
  const auto data = small_data(512);
  Network net(desk_convnet({3, 6, 6}, 4, 8, {8}, OmegaMode::Analytic), 2);
  const TrainReport r = train(net, data, quick_config(15));
  EXPECT_GE(r.epochs.back().train_accuracy, 0.9);
  EXPECT_LT(r.epochs.back().task_loss, r.epochs.front().task_loss);
}

TEST(Training, PenaltyLowersOnesFraction) {
  const auto data = small_data();
  Network free_net(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 3);
  Network sparse_net(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 3);
  TrainConfig c = quick_config(15);
  const TrainReport rf = train(free_net, data, c);
  c.gamma = 0.9;
  c.ec = 0.05;
  const TrainReport rs = train(sparse_net, data, c);
  EXPECT_LT(rs.epochs.back().ones_fraction, rf.epochs.back().ones_fraction);
  EXPECT_LT(rs.epochs.back().ones_fraction, 0.5 * rf.epochs.back().ones_fraction)
      << rs.epochs.back().ones_fraction << ' ' << rf.epochs.back().ones_fraction;
  EXPECT_GT(rs.epochs.front().lambda, 0.0);
  EXPECT_EQ(rf.epochs.front().lambda, 0.0);
}

TEST(Training, LatentWeightsStayClipped) {
  Network net(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Analytic), 4);
  TrainConfig c = quick_config(3);
  c.learning_rate = 0.1;
  train(net, small_data(), c);
  for (WeightBlock* b : net.binarized_blocks()) EXPECT_LE(b->latent().cwiseAbs().maxCoeff(), 1.0);
}

TEST(Snapshot, RoundTrip) {
  Network net(desk_convnet({3, 6, 6}, 4, 4, {4}, OmegaMode::Learned), 5);
  train(net, small_data(), quick_config(1));
  const auto path = std::filesystem::temp_directory_path() / "sbnn_test_snapshot.json";
  save_snapshot(net, path);
  Network back = load_snapshot(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(snapshot_id(back), snapshot_id(net));
  std::mt19937_64 rng(1);
  const Batch x = random_batch(rng, 5, 108);
  EXPECT_EQ(net.forward(x, {}), back.forward(x, {}));
}

TEST(Snapshot, RejectsMalformed) {
  EXPECT_THROW(network_from_json(nlohmann::json::parse(R"({"format":"other"})")), ValidationError);
  EXPECT_THROW(network_from_json(nlohmann::json::parse("[]")), ValidationError);
}

TEST(Quantize, FixedPlusMinusOneDomain) {
  Network net(desk_convnet({3, 6, 6}, 4, 4, {4, 4}, OmegaMode::FixedPM1), 6);
  const model::QuantizedModel m = quantize_snapshot(net, OmegaMode::FixedPM1);
  int binary = 0;
  for (const auto& l : m.layers) {
    if (const auto* c = std::get_if<model::BinaryConv>(&l)) {
      EXPECT_EQ(c->omega.alpha(), -1.0);
      EXPECT_EQ(c->omega.beta(), 1.0);
      ++binary;
    }
  }
  EXPECT_EQ(binary, 2);
  EXPECT_TRUE(std::holds_alternative<model::FloatConv>(m.layers.front()));
  EXPECT_TRUE(std::holds_alternative<model::FloatLinear>(m.layers.back()));
}

TEST(Quantize, EngineMatchesReferenceAndNetwork) {
  const auto data = small_data();
  for (OmegaMode mode : {OmegaMode::Analytic, OmegaMode::Learned, OmegaMode::FixedPM1}) {
    Network net(desk_convnet({3, 6, 6}, 4, 6, {6, 6}, mode), 7);
    TrainConfig c = quick_config(2);
    c.omega_mode = mode;
    c.gamma = 0.3;
    c.ec = 0.2;
    train(net, data, c);
    const model::QuantizedModel m = quantize_snapshot(net, mode);
    const infer::SparseEngine engine(m);
    const std::vector<int> pred = predict(net, data.images);
    std::size_t agree = 0;
    for (Eigen::Index i = 0; i < data.images.rows(); ++i) {
      const std::vector<double> x = row(data.images, i);
      const infer::Trace a = engine.trace(x);
      const infer::Trace b = reference_forward(m, x);
      ASSERT_EQ(a.output, b.output);
      for (std::size_t k = 0; k < m.layers.size(); ++k) {
        if (model::is_binary(m.layers[k])) {
          ASSERT_EQ(a.preacts[k].z_prime, b.preacts[k].z_prime);
        }
      }
      const auto arg = std::max_element(a.output.begin(), a.output.end()) - a.output.begin();
      agree += arg == pred[static_cast<std::size_t>(i)] ? 1 : 0;
    }
    EXPECT_GE(static_cast<double>(agree) / static_cast<double>(data.size()), 0.98) << to_string(mode);
  }
}

TEST(Quantize, RejectsDanglingBatchNorm) {
  NetworkSpec s;
  s.input = {4, 1, 1};
  s.layers = {{LayerKind::Linear, 4}, {LayerKind::BatchNorm}, {LayerKind::Classifier, 2}};
  Network net(s, 1);
  EXPECT_THROW(quantize_snapshot(net, OmegaMode::Analytic), ValidationError);
}

}  // namespace
