#include "mio/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace mio;

namespace {

TEST(Rng, DeterministicPerSeed) {
  Rng a(42), b(42), c(43);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double va = a.uniform();
    EXPECT_EQ(va, b.uniform());
    if (va != c.uniform()) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, SubstreamsAreIndependent) {
  Rng a(42, 1), b(42, 2), a2(42, 1);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    EXPECT_EQ(va, a2.uniform());
    if (va != b.uniform()) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformRange) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    ASSERT_GE(v, -2.0);
    ASSERT_LT(v, 3.0);
  }
}

TEST(Rng, GaussianMoments) {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.gaussian();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Rng, PoissonMean) {
  Rng rng(9);
  const int n = 50000;
  long total = 0;
  for (int i = 0; i < n; ++i) total += rng.poisson(5.0);
  EXPECT_NEAR(static_cast<double>(total) / n, 5.0, 0.1);
  EXPECT_EQ(rng.poisson(0.0), 0);
  EXPECT_EQ(rng.poisson(-1.0), 0);
}

}  // namespace
