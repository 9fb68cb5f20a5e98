/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "alanet/ordinal.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "alanet/error.hpp"
#include "alanet/random.hpp"
#include "oracles.hpp"

namespace alanet::ordinal {
namespace {

TEST(EncodeRankTest, Examples) {
  EXPECT_EQ(encode_rank(0, 5), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(encode_rank(4, 5), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(encode_rank(2, 5), (std::vector<double>{1, 1, 0, 0}));
}

TEST(EncodeRankTest, OutOfRangeThrows) {
  EXPECT_THROW(encode_rank(-1, 5), InvalidInput);
  EXPECT_THROW(encode_rank(5, 5), InvalidInput);
  EXPECT_THROW(encode_rank(0, 1), InvalidInput);
}

TEST(EncodeRankTest, NonIncreasingAndRoundTrip) {
  for (int y = 0; y < kDefaultRanks; ++y) {
    const std::vector<double> e = encode_rank(y, kDefaultRanks);
    ASSERT_EQ(e.size(), static_cast<std::size_t>(kDefaultRanks - 1));
    for (std::size_t k = 1; k < e.size(); ++k) EXPECT_LE(e[k], e[k - 1]);
    EXPECT_EQ(decode_age(e), static_cast<double>(y));
  }
}

TEST(DecodeAgeTest, Examples) {
  EXPECT_EQ(decode_age(std::vector<double>(239, 0.0)), 0.0);
  EXPECT_EQ(decode_age(std::vector<double>(239, 1.0)), 239.0);
  EXPECT_DOUBLE_EQ(decode_age(std::vector<double>{1, 1, 0.5, 0, 0}), 2.5);
}

TEST(DecodeAgeTest, NoMonotoneProjection) {
  EXPECT_DOUBLE_EQ(decode_age(std::vector<double>{0, 1, 0, 1}), 2.0);
}

TEST(OrdinalLossTest, SaturatedCorrectIsNearZero) {
  EXPECT_LT(loss(std::vector<double>{20, 20, -20, -20}, 2), 1e-8);
}

TEST(OrdinalLossTest, ZeroLogitsGiveLn2) {
  for (int y : {0, 3, 9}) EXPECT_NEAR(loss(std::vector<double>(9, 0.0), y), std::log(2.0), 1e-15);
}

TEST(OrdinalLossTest, StableForHugeLogits) {
  const double v = loss(std::vector<double>{1e6, -1e6, 1e6}, 0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, (1e6 + 1e6) / 3.0, 1e-6);
}

TEST(OrdinalLossTest, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(9);
    for (double& v : z) v = rng.normal(0, 2);
    const int y = rng.uniform_int(0, 9);
    const LossWithGrad lg = loss_and_grad(z, y);
    EXPECT_DOUBLE_EQ(lg.value, loss(z, y));
    const auto fd = oracle::finite_difference([&](const std::vector<double>& x) { return loss(x, y); }, z);
    EXPECT_LT(oracle::max_relative_error(lg.grad, fd), 1e-4);
  }
}

TEST(OrdinalLossTest, EqualTargetPositionsArePermutable) {
  // Positions 0..2 all have target 1 for y = 5.
  const std::vector<double> a = {0.3, -1.2, 2.0, 0.7, -0.4, 1.1, 0.0, -2.0, 0.5};
  std::vector<double> b = a;
  std::swap(b[0], b[2]);
  EXPECT_NEAR(loss(a, 5), loss(b, 5), 1e-15);
}

TEST(SigmoidTest, Stable) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
}

}  // namespace
}  // namespace alanet::ordinal
