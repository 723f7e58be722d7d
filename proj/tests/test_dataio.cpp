#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "sbnn/dataio.hpp"

namespace {

using namespace sbnn;
using namespace sbnn::dataio;
namespace fs = std::filesystem;

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("sbnn_test_" + name); }

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}

DataError::Kind data_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no DataError";
  return DataError::Kind::Io;
}

TEST(Cifar, SingleZeroRecord) {
  const auto p = temp("cifar_zero.bin");
  write_bytes(p, std::vector<std::uint8_t>(3073, 0));
  const Dataset d = load_cifar10_binary(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.labels[0], 0);
  EXPECT_EQ(d.shape, (FeatureShape{3, 32, 32}));
  // Black pixels normalized with the fixed per-channel statistics.
  EXPECT_NEAR(d.images(0, 0), -kCifar10Mean[0] / kCifar10Std[0], 1e-12);
  EXPECT_NEAR(d.images(0, 2048), -kCifar10Mean[2] / kCifar10Std[2], 1e-12);
  fs::remove(p);
}

TEST(Cifar, SizeMismatchAndLabelRange) {
  const auto p = temp("cifar_bad.bin");
  write_bytes(p, std::vector<std::uint8_t>(3072, 0));
  EXPECT_EQ(data_error([&] { load_cifar10_binary(p); }), DataError::Kind::SizeMismatch);
  std::vector<std::uint8_t> rec(3073, 0);
  rec[0] = 10;
  write_bytes(p, rec);
  EXPECT_EQ(data_error([&] { load_cifar10_binary(p); }), DataError::Kind::LabelOutOfRange);
  fs::remove(p);
  EXPECT_EQ(data_error([&] { load_cifar10_binary(p); }), DataError::Kind::Io);
}

TEST(Cifar, WriterRoundTrip) {
  std::mt19937_64 rng(1);
  std::vector<CifarRecord> recs(10);
  for (auto& r : recs) {
    r.label = static_cast<std::uint8_t>(rng() % 10);
    for (auto& px : r.pixels) px = static_cast<std::uint8_t>(rng());
  }
  const auto p = temp("cifar_rt.bin");
  write_cifar10_binary(p, recs);
  const Dataset a = load_cifar10_binary(p);
  const Dataset b = load_cifar10_binary(p);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_EQ(a.images, b.images);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a.labels[i], recs[i].label);
    const int c = 1;
    const double expect = (recs[i].pixels[1024 + 5] / 255.0 - kCifar10Mean[c]) / kCifar10Std[c];
    EXPECT_NEAR(a.images(static_cast<Eigen::Index>(i), 1024 + 5), expect, 1e-12);
  }
  fs::remove(p);
}

TEST(Idx, MinimalFile) {
  std::vector<std::uint8_t> img, lab;
  be32(img, 0x803);
  be32(img, 1);
  be32(img, 1);
  be32(img, 1);
  img.push_back(200);
  be32(lab, 0x801);
  be32(lab, 1);
  lab.push_back(3);
  const auto pi = temp("idx_img"), pl = temp("idx_lab");
  write_bytes(pi, img);
  write_bytes(pl, lab);
  const Dataset d = load_idx(pi, pl);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.shape, (FeatureShape{1, 1, 1}));
  EXPECT_EQ(d.labels[0], 3);
  EXPECT_NEAR(d.mean[0], 200.0 / 255.0, 1e-15);

  auto wrong = img;
  wrong[3] = 0x01;
  write_bytes(pi, wrong);
  EXPECT_EQ(data_error([&] { load_idx(pi, pl); }), DataError::Kind::BadMagic);

  std::vector<std::uint8_t> two;
  be32(two, 0x803);
  be32(two, 2);
  be32(two, 1);
  be32(two, 1);
  two.push_back(1);
  two.push_back(2);
  write_bytes(pi, two);
  EXPECT_EQ(data_error([&] { load_idx(pi, pl); }), DataError::Kind::CountMismatch);
  fs::remove(pi);
  fs::remove(pl);
}

TEST(Synthetic, Deterministic) {
  const Dataset a = synthetic_classification(5, 100, 4, 0.5);
  const Dataset b = synthetic_classification(5, 100, 4, 0.5);
  const Dataset c = synthetic_classification(6, 100, 4, 0.5);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.images, c.images);
  EXPECT_EQ(a.shape, (FeatureShape{3, 8, 8}));
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(synthetic_classification(1, 0, 4, 0.5), ValidationError);
  EXPECT_THROW(synthetic_classification(1, 3, 4, 0.5), ValidationError);
  EXPECT_THROW(synthetic_classification(1, 10, 1, 0.5), ValidationError);
  EXPECT_THROW(synthetic_classification(1, 10, 2, -1.0), ValidationError);
}

TEST(Synthetic, EasySetIsLinearlySeparable) {
  // Least-squares linear classifier on one-hot targets.
  const Dataset d = synthetic_classification(3, 600, 4, 0.0);
  Eigen::MatrixXd x(d.images.rows(), d.images.cols() + 1);
  x << d.images, Eigen::VectorXd::Ones(d.images.rows());
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(d.images.rows(), d.classes);
  for (std::size_t i = 0; i < d.size(); ++i) y(static_cast<Eigen::Index>(i), d.labels[i]) = 1.0;
  const Eigen::MatrixXd w = x.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd s = x * w;
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index arg = 0;
    s.row(i).maxCoeff(&arg);
    hit += arg == d.labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(hit) / static_cast<double>(d.size()), 0.99);
}

TEST(Slice, CopiesRows) {
  const Dataset d = synthetic_classification(5, 20, 2, 0.5);
  const Dataset s = d.slice(5, 9);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s.images.row(0), d.images.row(5));
  EXPECT_EQ(s.labels[3], d.labels[8]);
}

TEST(Augment, SeededAndShapePreserving) {
  const Dataset d = synthetic_classification(5, 8, 2, 0.5);
  Batch a = d.images, b = d.images;
  std::mt19937_64 r1(3), r2(3);
  augment(a, d.shape, r1);
  augment(b, d.shape, r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows(), d.images.rows());
}

}  // namespace
