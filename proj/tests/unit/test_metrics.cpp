// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#include "proteus/error.hpp"
#include "proteus/metrics.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace proteus {
namespace {

TEST(AverageAccuracy, Fixtures) {
  AccMatrix m(2);
  m.set(1, 1, 0.9);
  EXPECT_DOUBLE_EQ(average_accuracy(m, 1), 0.9);
  m.set(1, 2, 0.8);
  m.set(2, 2, 0.7);
  EXPECT_DOUBLE_EQ(average_accuracy(m, 2), 0.75);

  AccMatrix ones(4);
  for (int k = 1; k <= 4; ++k)
    for (int t = 1; t <= k; ++t) ones.set(t, k, 1.0);
  EXPECT_EQ(average_accuracy(ones, 4), 1.0);
}

TEST(AverageAccuracy, MissingEntryIsDataError) {
  AccMatrix m(2);
  m.set(1, 2, 0.5);
  EXPECT_THROW(average_accuracy(m, 2), DataError);
  EXPECT_THROW(average_accuracy(m, 3), ConfigError);
}

TEST(Forgetting, Fixtures) {
  AccMatrix drop(2);
  drop.set(1, 1, 0.9);
  drop.set(1, 2, 0.8);
  EXPECT_NEAR(forgetting(drop, 2), 0.1, 1e-15);

  AccMatrix gain(2);
  gain.set(1, 1, 0.8);
  gain.set(1, 2, 0.9);
  EXPECT_NEAR(forgetting(gain, 2), -0.1, 1e-15);

  AccMatrix flat(2);
  flat.set(1, 1, 0.6);
  flat.set(1, 2, 0.6);
  EXPECT_EQ(forgetting(flat, 2), 0.0);
}

TEST(Forgetting, UsesBestEarlierColumn) {
  // Row 1: 0.7, 0.9, 0.5.  Row 2: 0.8, 0.6.  F₃ = ((0.9 − 0.5) + (0.8 − 0.6)) / 2.
  AccMatrix m(3);
  m.set(1, 1, 0.7);
  m.set(1, 2, 0.9);
  m.set(1, 3, 0.5);
  m.set(2, 2, 0.8);
  m.set(2, 3, 0.6);
  m.set(3, 3, 1.0);
  EXPECT_NEAR(forgetting(m, 3), 0.3, 1e-15);
  EXPECT_THROW(forgetting(m, 1), ConfigError);
}

TEST(Forgetting, PermutingTasksPermutesNothingInTheMean) {
  // Swap the roles of tasks 1 and 2 while keeping each row's history.
  AccMatrix a(3), b(3);
  a.set(1, 1, 0.9), a.set(1, 2, 0.8), a.set(1, 3, 0.7);
  a.set(2, 2, 0.6), a.set(2, 3, 0.5);
  a.set(3, 3, 0.4);
  b.set(1, 1, 0.6), b.set(1, 2, 0.6), b.set(1, 3, 0.5);
  b.set(2, 2, 0.9), b.set(2, 3, 0.7);
  b.set(3, 3, 0.4);
  EXPECT_NEAR(average_accuracy(a, 3), average_accuracy(b, 3), 1e-15);
  EXPECT_NEAR(forgetting(a, 3), (0.2 + 0.1) / 2, 1e-15);
  EXPECT_NEAR(forgetting(b, 3), (0.1 + 0.2) / 2, 1e-15);
}

TEST(AccMatrix, OnlyUpperTriangleIsAddressable) {
  AccMatrix m(3);
  EXPECT_THROW(m.set(2, 1, 0.5), ConfigError);
  EXPECT_THROW(m.set(1, 4, 0.5), ConfigError);
  EXPECT_THROW(m.set(1, 1, 1.5), ConfigError);
  EXPECT_FALSE(m.has(1, 1));
  EXPECT_THROW(AccMatrix(0), ConfigError);
}

TEST(AccMatrix, JsonRoundTrip) {
  AccMatrix m(3);
  m.set(1, 1, 0.25);
  m.set(1, 3, 0.5);
  m.set(2, 3, 0.75);
  const Json j = m.to_json();
  EXPECT_TRUE(j[1][0].is_null());
  EXPECT_TRUE(j[0][1].is_null());
  const AccMatrix back = AccMatrix::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_THROW(AccMatrix::from_json(Json::parse("[[0.5, null], [0.2, 0.3]]")), ValidationError);
  EXPECT_THROW(AccMatrix::from_json(Json::parse("[[0.5, 0.1]]")), ValidationError);
}

TEST(RetrievalAccuracy, Fixtures) {
  const std::vector<int> truth{1, 2, 3, 4};
  const std::vector<int> all = truth;
  const std::vector<int> none{2, 3, 4, 1};
  const std::vector<int> three{1, 2, 3, 1};
  EXPECT_EQ(retrieval_accuracy(all, truth), 1.0);
  EXPECT_EQ(retrieval_accuracy(none, truth), 0.0);
  EXPECT_EQ(retrieval_accuracy(three, truth), 0.75);
  const std::vector<int> shorter{1};
  EXPECT_THROW(retrieval_accuracy(shorter, truth), DataError);
  EXPECT_THROW(retrieval_accuracy({}, {}), DataError);
}

TEST(RetrievalAccuracyGain, TwentyTwoPointTwoNineFixture) {
  const double gain = retrieval_accuracy_gain(96.0, 38.59, 3.576, 1.0);
  EXPECT_NEAR(gain, 22.29, 0.005);
}

TEST(RetrievalAccuracyGain, SignsAndErrors) {
  EXPECT_EQ(retrieval_accuracy_gain(50.0, 50.0, 2.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(retrieval_accuracy_gain(60.0, 50.0, 1.0, 3.0), -5.0);
  EXPECT_THROW(retrieval_accuracy_gain(1.0, 0.0, 2.0, 2.0), ConfigError);
}

}  // namespace
}  // namespace proteus
