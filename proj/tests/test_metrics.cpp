#include <gtest/gtest.h>

#include <cmath>

#include "csar/metrics.hpp"

using namespace csar;

TEST(SuccessRate, Percentages) {
  EXPECT_EQ(success_rate(8, 10), 80.0);
  EXPECT_EQ(success_rate(0, 10), 0.0);
  EXPECT_EQ(success_rate(10, 10), 100.0);
  EXPECT_THROW(success_rate(1, 0), std::invalid_argument);
  EXPECT_THROW(success_rate(11, 10), std::invalid_argument);
}

TEST(StepsToThreshold, FirstFullWindowAtOrAboveThreshold) {
  // Failures until step 124, then successes: the window of 20 ending at step
  // 140 holds 16 successes, the first time it reaches 80%.
  std::vector<int> steps;
  std::vector<bool> succ;
  for (int s = 1; s <= 200; ++s) {
    steps.push_back(s);
    succ.push_back(s > 124);
  }
  EXPECT_EQ(steps_to_threshold(steps, succ, 20, 80.0), 140);
  EXPECT_EQ(steps_to_threshold(steps, std::vector<bool>(200, false), 20, 80.0), std::nullopt);
  EXPECT_EQ(steps_to_threshold(steps, std::vector<bool>(200, false), 20, 0.0), 20);
  // Early successes before the window fills do not count.
  std::vector<bool> early(200, false);
  for (int i = 0; i < 5; ++i) early[static_cast<std::size_t>(i)] = true;
  EXPECT_EQ(steps_to_threshold(steps, early, 20, 25.0), 20);
  EXPECT_EQ(steps_to_threshold(steps, early, 20, 30.0), std::nullopt);
}

TEST(RollingFraction, PartialAndFullWindows) {
  const std::vector<bool> s{true, false, true, true};
  EXPECT_DOUBLE_EQ(rolling_fraction(s, 0, 3), 1.0);
  EXPECT_DOUBLE_EQ(rolling_fraction(s, 1, 3), 0.5);
  EXPECT_DOUBLE_EQ(rolling_fraction(s, 3, 3), 2.0 / 3.0);
}

TEST(Quantiles, MedianAndIqr) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.75), 3.25);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(SignTest, ExactBinomialTail) {
  std::vector<double> a(10, 1.0), b(10, 2.0);
  auto t = sign_test_less(a, b);
  EXPECT_EQ(t.wins, 10);
  EXPECT_NEAR(t.p_value, 1.0 / 1024.0, 1e-15);
  b[0] = 0.0;
  t = sign_test_less(a, b);
  EXPECT_NEAR(t.p_value, 11.0 / 1024.0, 1e-15);
  b[1] = 1.0;  // tie dropped: 8 wins of 9
  t = sign_test_less(a, b);
  EXPECT_EQ(t.ties, 1);
  EXPECT_NEAR(t.p_value, 10.0 / 512.0, 1e-15);
  EXPECT_EQ(sign_test_less({1.0}, {1.0}).p_value, 1.0);
}
