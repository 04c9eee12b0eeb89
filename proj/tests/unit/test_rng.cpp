#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "scoopsim/rng.hpp"

using namespace scoopsim;

TEST(RandomStream, SameSeedAndNameReplay) {
  RandomStream a(42, "placement"), b(42, "placement");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, NamesAndSeedsSeparateStreams) {
  RandomStream a(42, "placement"), b(42, "perception"), c(43, "placement");
  const auto va = a.next_u64();
  EXPECT_NE(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
}

TEST(RandomStream, UniformStaysInUnitInterval) {
  RandomStream r(1, "u");
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(RandomStream, UniformRangeBounds) {
  RandomStream r(2, "u");
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-0.3, 0.7);
    ASSERT_GE(u, -0.3);
    ASSERT_LT(u, 0.7);
  }
}

TEST(RandomStream, GaussianMoments) {
  RandomStream r(3, "g");
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian(2.0, 0.5);
    s += g;
    s2 += g * g;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 2.0, 0.01);
  EXPECT_NEAR(std::sqrt(var), 0.5, 0.01);
}

TEST(RandomStream, BernoulliRate) {
  RandomStream r(4, "b");
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += r.bernoulli(0.3);
  EXPECT_NEAR(hits / 100000.0, 0.3, 0.01);
}

TEST(RngStreams, ConsumingOneStreamLeavesOthersUntouched) {
  RngStreams a(9), b(9);
  for (int i = 0; i < 50; ++i) a.placement.uniform();
  EXPECT_EQ(a.perception, b.perception);
  EXPECT_EQ(a.properties, b.properties);
  EXPECT_EQ(a.augmentation, b.augmentation);
  EXPECT_NE(a.placement, b.placement);
}

TEST(HashName, StableAndDistinct) {
  EXPECT_EQ(hash_name("tofu"), hash_name("tofu"));
  std::set<std::uint64_t> seen;
  for (const char* n : {"tofu", "grape", "pea", "cheesecake", "placement", "perception"}) {
    EXPECT_TRUE(seen.insert(hash_name(n)).second) << n;
  }
}
