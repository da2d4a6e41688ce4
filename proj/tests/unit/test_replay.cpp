#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "aggrl/errors.hpp"
#include "aggrl/replay.hpp"

using namespace aggrl;

namespace {

Experience tagged(double reward) {
  Experience e;
  e.reward = reward;
  e.observation[0] = reward;
  e.action = DiscreteAction{static_cast<int>(std::fmod(std::abs(reward), 9.0))};
  return e;
}

}  // namespace

TEST(ReplayBuffer, NotReadyWhileUnderfull) {
  ReplayBuffer buffer(1000);
  for (int i = 0; i < 99; ++i) buffer.push(tagged(i));
  Rng rng(1);
  EXPECT_FALSE(buffer.ready(100));
  EXPECT_FALSE(buffer.sample_batch(100, rng).has_value());
  buffer.push(tagged(99));
  EXPECT_TRUE(buffer.sample_batch(100, rng).has_value());
}

TEST(ReplayBuffer, RepeatedExperienceGivesIdenticalBatch) {
  ReplayBuffer buffer(10);
  Experience e = tagged(-1.5);
  e.action = WheelDelta{0.05, -0.1};
  e.terminal = true;
  for (int k = 0; k < 8; ++k) buffer.push(e);
  Rng rng(2);
  const Batch b = *buffer.sample_batch(8, rng);
  ASSERT_EQ(b.size(), 8);
  for (int j = 0; j < 8; ++j) {
    EXPECT_EQ(b.rewards(j), -1.5);
    EXPECT_EQ(b.terminal(j), 1.0);
    EXPECT_EQ(b.action_indices[static_cast<std::size_t>(j)], -1);
    EXPECT_EQ(b.action_deltas(0, j), 0.05);
    EXPECT_EQ(b.action_deltas(1, j), -0.1);
    EXPECT_EQ(b.observations(0, j), -1.5);
  }
}

TEST(ReplayBuffer, DiscreteActionsDecodeIntoDeltas) {
  ReplayBuffer buffer(4);
  Experience e;
  e.action = DiscreteAction{2};
  buffer.push(e);
  Rng rng(3);
  const Batch b = *buffer.sample_batch(1, rng);
  EXPECT_EQ(b.action_indices[0], 2);
  EXPECT_EQ(b.action_deltas(0, 0), -0.1);
  EXPECT_EQ(b.action_deltas(1, 0), 0.1);
}

// Same ring semantics at a capacity small enough to exercise in a unit test.
TEST(ReplayBuffer, RingEvictsOldest) {
  const std::size_t capacity = 1000;
  const int k = 337;
  ReplayBuffer buffer(capacity);
  for (int i = 0; i < static_cast<int>(capacity) + k; ++i) buffer.push(tagged(i));
  EXPECT_EQ(buffer.size(), capacity);
  EXPECT_EQ(buffer.inserted(), capacity + k);
  EXPECT_EQ(buffer.at(0).reward, k);
  EXPECT_EQ(buffer.at(capacity - 1).reward, static_cast<double>(capacity) + k - 1);
  EXPECT_THROW(buffer.at(capacity), UsageError);

  Rng rng(4);
  std::set<double> seen;
  for (int i = 0; i < 200; ++i) {
    const Batch b = *buffer.sample_batch(100, rng);
    for (int j = 0; j < b.size(); ++j) seen.insert(b.rewards(j));
  }
  EXPECT_GE(*seen.begin(), k);
}

TEST(ReplayBuffer, SamplingIsUniform) {
  const int n = 1000;
  const int draws = 100000;
  ReplayBuffer buffer(n);
  for (int i = 0; i < n; ++i) buffer.push(tagged(i));
  Rng rng(5);
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws / 100; ++i)
    for (std::size_t idx : buffer.sample_indices(100, rng)) ++counts[idx];

  const double p = 1.0 / n;
  const double expected = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  double chi2 = 0.0;
  for (int c : counts) {
    // 5 sigma per index keeps the family-wise false alarm rate below 1e-3.
    EXPECT_LE(std::abs(c - expected), 5 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // Chi-square with n - 1 degrees of freedom: mean n - 1, sd sqrt(2 (n - 1)).
  EXPECT_LE(std::abs(chi2 - (n - 1)), 3 * std::sqrt(2.0 * (n - 1)));
}

TEST(ReplayBuffer, ZeroCapacityIsConfigError) { EXPECT_THROW(ReplayBuffer(0), ConfigError); }
