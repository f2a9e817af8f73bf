#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "spillscm/random.hpp"

using namespace spillscm;

TEST(DeriveSeed, StreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(42, s));
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
  EXPECT_NE(derive_seed(42, 3), derive_seed(43, 3));
}

TEST(InverseGamma, ReciprocalMeanMatchesShapeOverScale) {
  // 1/X ~ Gamma(shape, rate = scale) so E[1/X] = shape / scale.
  Rng rng(7);
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += 1.0 / draw_inverse_gamma(1.0, 3.0, rng);
  EXPECT_NEAR(sum / n, 1.0 / 3.0, 0.01 / 3.0);
}

TEST(InverseGamma, MeanForShapeAboveOne) {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += draw_inverse_gamma(4.0, 6.0, rng);
  // scale / (shape - 1) = 2
  EXPECT_NEAR(sum / n, 2.0, 0.03);
}

TEST(InverseGamma, ClampedToBounds) {
  Rng rng(1);
  ScaleBounds b{1e-3, 1e3};
  for (int i = 0; i < 1000; ++i) {
    const double x = draw_inverse_gamma(0.5, 1e-12, rng, b);
    EXPECT_GE(x, b.lower);
    EXPECT_LE(x, b.upper);
  }
}

TEST(TruncatedNormal, StaysInsideInterval) {
  Rng rng(5);
  for (int i = 0; i < 20000; ++i) {
    const double x = draw_truncated_normal(0.9, 0.3, -1.0, 1.0, rng);
    EXPECT_GT(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(TruncatedNormal, FarTailUsesExponentialProposal) {
  Rng rng(9);
  double sum = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double x = draw_truncated_normal(0.0, 1.0, 5.0, 1e300, rng);
    ASSERT_GE(x, 5.0);
    sum += x;
  }
  // Mills ratio: E[Z | Z > 5] = phi(5) / (1 - Phi(5)) ~= 5.1865
  EXPECT_NEAR(sum / n, 5.1865, 0.01);
}

TEST(TruncatedNormal, SymmetricIntervalKeepsZeroMean) {
  Rng rng(3);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += draw_truncated_normal(0.0, 2.0, -1.0, 1.0, rng);
  EXPECT_NEAR(sum / n, 0.0, 0.01);
}

TEST(UniformOpen, NeverZero) {
  Rng rng(0);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform_open(rng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
