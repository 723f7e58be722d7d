#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sbnn/sparsity.hpp"

namespace {

using namespace sbnn;
using namespace sbnn::sparsity;

TEST(Entropy, FrozenValues) {
  EXPECT_EQ(binary_entropy(0.0), 0.0);
  EXPECT_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.5), 1.0, 1e-15);
  EXPECT_NEAR(binary_entropy(0.11), 0.499915958164528, 1e-14);
  for (double p : {0.01, 0.2, 0.37, 0.9}) EXPECT_NEAR(binary_entropy(p), oracle::entropy(p), 1e-14);
}

TEST(Entropy, InverseMatchesNewtonOracle) {
  for (double h = 0.01; h < 1.0; h += 0.01) {
    EXPECT_NEAR(inverse_binary_entropy(h), oracle::inverse_entropy_newton(h), 1e-12) << h;
  }
  EXPECT_NEAR(inverse_binary_entropy(0.5), 0.11002786443835955, 1e-13);
  EXPECT_EQ(inverse_binary_entropy(0.0), 0.0);
  EXPECT_EQ(inverse_binary_entropy(1.0), 0.5);
}

TEST(Entropy, RoundTrip) {
  for (double p = 0.001; p <= 0.5; p += 0.001) {
    EXPECT_NEAR(inverse_binary_entropy(binary_entropy(p)), p, 1e-10);
    EXPECT_NEAR(binary_entropy(inverse_binary_entropy(binary_entropy(p))), binary_entropy(p), 1e-10);
  }
}

TEST(Entropy, RejectsOutOfRange) {
  EXPECT_THROW(inverse_binary_entropy(-0.1), ValidationError);
  EXPECT_THROW(inverse_binary_entropy(1.1), ValidationError);
  EXPECT_THROW(binary_entropy(1.5), ValidationError);
}

TEST(Budget, HalfBitThousandWeights) {
  const SparsityBudget b = make_budget(0.5, 1000);
  EXPECT_NEAR(b.m, 110.02786443835954, 1e-9);
  EXPECT_NEAR(b.ec, b.m / 1000.0, 1e-15);
  EXPECT_NEAR(b.p_star, 0.11002786443835955, 1e-13);
}

TEST(Budget, FromSparsity) {
  const SparsityBudget b = budget_from_sparsity(0.95, 200);
  EXPECT_NEAR(b.ec, 0.05, 1e-12);
  EXPECT_NEAR(b.m, 10.0, 1e-9);
  EXPECT_NEAR(b.h_star, oracle::entropy(0.05), 1e-12);
}

TEST(Penalty, SemanticsExhaustive) {
  // U <= M exactly when the penalty vanishes, for every bit pattern with N <= 20
  // (patterns grouped by popcount since g depends only on U).
  for (std::size_t n = 1; n <= 20; ++n) {
    for (double h : {0.1, 0.3, 0.5, 0.8, 1.0}) {
      const SparsityBudget b = make_budget(h, n);
      for (std::size_t u = 0; u <= n; ++u) {
        const bool within = static_cast<double>(u) <= b.m;
        EXPECT_EQ(penalty_g(u, n, b.ec) == 0.0, within) << n << ' ' << h << ' ' << u;
      }
    }
  }
  // Full enumeration of patterns for small N through the vector overload.
  for (std::size_t n = 1; n <= 12; ++n) {
    const SparsityBudget b = make_budget(0.5, n);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      ZeroOneWeights bits(static_cast<Eigen::Index>(n));
      std::size_t u = 0;
      for (std::size_t i = 0; i < n; ++i) {
        bits[static_cast<Eigen::Index>(i)] = (mask >> i) & 1u;
        u += (mask >> i) & 1u;
      }
      EXPECT_EQ(penalty_g(bits, b.ec) == 0.0, static_cast<double>(u) <= b.m);
    }
  }
}

TEST(Penalty, JMatchesG) {
  SignWeights s(6);
  s << 1, 1, 1, -1, -1, 1;
  EXPECT_NEAR(penalty_j(s, 0.5), 4.0 / 6.0 - 0.5, 1e-15);
  EXPECT_EQ(penalty_j(s, 0.9), 0.0);
}

TEST(Lambda, FrozenExample) {
  const double lam = lambda_update(2.0, 0.25, 0.1);
  EXPECT_NEAR(lam, 0.2 / 0.225, 1e-12);
  EXPECT_NEAR(lam * 0.25 / (2.0 + lam * 0.25), 0.1, 1e-15);
}

TEST(Lambda, SubstitutionRecoversGamma) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> loss(0.01, 10.0), j(1e-6, 1.0), g(1e-6, 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double l = loss(rng), jj = j(rng), gg = g(rng);
    const double lam = lambda_update(l, jj, gg);
    const double back = lam * jj / (l + lam * jj);
    EXPECT_NEAR(back, gg, 1e-12 * gg);
  }
}

TEST(Lambda, ZeroBranches) {
  EXPECT_EQ(lambda_update(1.0, 0.5, 0.0), 0.0);
  EXPECT_EQ(lambda_update(1.0, 0.0, 0.3), 0.0);
  EXPECT_EQ(lambda_update(1.0, 1e-13, 0.3), 0.0);
  EXPECT_THROW(lambda_update(1.0, 0.5, 1.0), ValidationError);
}

}  // namespace
