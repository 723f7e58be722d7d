#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sbnn/bits.hpp"
#include "sbnn/kernels.hpp"

namespace {

using namespace sbnn;

TEST(PackedBits, SetGetPopcount) {
  PackedBits b(130);
  b.set(0, true);
  b.set(64, true);
  b.set(129, true);
  EXPECT_EQ(b.popcount(), 3u);
  EXPECT_TRUE(b.get(129));
  EXPECT_FALSE(b.get(128));
  b.set(64, false);
  EXPECT_EQ(b.popcount(), 2u);
  EXPECT_EQ(b.words().size(), 3u);
}

TEST(PackedBits, PackUnpackRoundTrip) {
  std::mt19937_64 rng(2);
  for (int n : {1, 63, 64, 65, 200}) {
    ZeroOneWeights w(n);
    for (int i = 0; i < n; ++i) w[i] = rng() % 2;
    EXPECT_EQ(pack(w).unpack(), w);
  }
}

TEST(Popcount, DotMatchesMaskedSum) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    SignWeights x(n);
    ZeroOneWeights w(n);
    std::vector<int> xs(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> ws(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x[i] = rng() % 2 ? 1 : -1;
      w[i] = rng() % 2;
      xs[static_cast<std::size_t>(i)] = x[i];
      ws[static_cast<std::size_t>(i)] = w[i];
    }
    const PackedBits px = pack_signs(x);
    EXPECT_EQ(popcount_dot(px, pack(w)), oracle::masked_sum(xs, ws));
    std::int64_t total = 0;
    for (int v : xs) total += v;
    EXPECT_EQ(q_compute(px), total);
  }
}

TEST(Popcount, HandExamples) {
  // Weights [[1,0],[0,0]] over x = [1,-1]: rows select x0, nothing.
  SignWeights x(2);
  x << 1, -1;
  ZeroOneWeights r0(2), r1(2);
  r0 << 1, 0;
  r1 << 0, 0;
  EXPECT_EQ(popcount_dot(pack_signs(x), pack(r0)), 1);
  EXPECT_EQ(popcount_dot(pack_signs(x), pack(r1)), 0);
  EXPECT_EQ(q_compute(pack_signs(x)), 0);
}

TEST(PackedRows, RowsStartOnWordBoundary) {
  PackedRows r(3, 70);
  r.set(1, 69, true);
  r.set(2, 0, true);
  EXPECT_EQ(r.row(0).size(), 2u);
  EXPECT_EQ(popcount(r.row(0)), 0u);
  EXPECT_TRUE(r.get(1, 69));
  EXPECT_EQ(popcount(r.row(2)), 1u);
}

TEST(Kernels, ClassifyByHammingWeight) {
  EXPECT_EQ(classify_kernel(0).tag, KernelClass::Tag::Zero);
  const KernelClass s = classify_kernel(1u << 7);
  EXPECT_EQ(s.tag, KernelClass::Tag::Single);
  EXPECT_EQ(s.index(), 7);
  EXPECT_EQ(classify_kernel(0x1FF).tag, KernelClass::Tag::Dense);
  EXPECT_EQ(classify_kernel(0x1FF).hamming_weight(), 9);
  // Bits above the nine taps are ignored.
  EXPECT_EQ(classify_kernel(0x200).tag, KernelClass::Tag::Zero);
}

TEST(Kernels, CensusAndHistogram) {
  std::vector<std::uint8_t> bits(27, 0);
  bits[9 + 4] = 1;                                    // single at tap 4
  for (int t = 18; t < 27; ++t) bits[static_cast<std::size_t>(t)] = 1;  // dense
  const KernelCensus c = classify_kernels(bits);
  EXPECT_EQ(c.total(), 3u);
  EXPECT_EQ(c.zero, 1u);
  EXPECT_EQ(c.single, 1u);
  EXPECT_EQ(c.dense, 1u);
  EXPECT_EQ(c.classes[1].index(), 4);
  const auto h = hamming_counts(c);
  EXPECT_EQ(h[0], 1u);
  EXPECT_EQ(h[1], 1u);
  EXPECT_EQ(h[9], 1u);
  EXPECT_THROW(classify_kernels(std::vector<std::uint8_t>(10, 0)), ShapeError);
}

}  // namespace
