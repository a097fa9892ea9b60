// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "sqish/timing.hpp"

using namespace sqish;

TEST(Timing, RecordsArePositive) {
  const Shape shape{2, 3, 16, 16};
  const auto records = time_all_activations(shape, 30, 5, 1);
  ASSERT_EQ(records.size(), timing_kinds().size());
  EXPECT_EQ(records.size(), 9u);
  for (const auto& r : records) {
    EXPECT_EQ(r.shape, shape);
    EXPECT_EQ(r.iters, 30);
    EXPECT_EQ(r.warmup, 5);
    EXPECT_GT(r.forward_mean_us, 0.0) << r.op;
    EXPECT_GT(r.backward_mean_us, 0.0) << r.op;
    EXPECT_GE(r.forward_std_us, 0.0) << r.op;
    EXPECT_GT(r.forward_median_of_means_us, 0.0) << r.op;
    EXPECT_GT(r.backward_median_of_means_us, 0.0) << r.op;
  }
}

TEST(Timing, KindsHaveUniqueLabels) {
  std::set<std::string> labels;
  for (const auto& [label, kind] : timing_kinds()) labels.insert(label);
  EXPECT_EQ(labels.size(), timing_kinds().size());
  EXPECT_TRUE(labels.count("sqish"));
  EXPECT_TRUE(labels.count("swish"));
}

TEST(Timing, InputIsDeterministicAndBounded) {
  const auto a = timing_input({4, 5}, 3);
  const auto b = timing_input({4, 5}, 3);
  ASSERT_EQ(a.size(), 20);
  EXPECT_TRUE((a == b).all());
  EXPECT_GE(a.minCoeff(), -4.0f);
  EXPECT_LT(a.maxCoeff(), 4.0f);
}

TEST(Timing, RejectsShortRuns) {
  const auto x = timing_input({8}, 0);
  EXPECT_THROW(time_activation("relu", act::Relu{}, x, {8}, 29, 5), DomainError);
  EXPECT_THROW(time_activation("relu", act::Relu{}, x, {8}, 30, 4), DomainError);
  EXPECT_THROW(time_all_activations({8}, 10, 5, 0), DomainError);
}
