// Copyright 2026 The repprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "oracles.hpp"
#include "repprobe/locality.hpp"

namespace repprobe {
namespace {

namespace oracle = testing::oracle;

AttentionRecord record(std::size_t n, double fill = 0.0) {
  AttentionRecord r;
  r.matrix = MatrixD(n, n, fill);
  return r;
}

AttentionRecord random_stochastic(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AttentionRecord r = record(n);
  for (std::size_t q = 0; q < n; ++q) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += (r.matrix(q, k) = u(rng));
    for (std::size_t k = 0; k < n; ++k) r.matrix(q, k) /= s;
  }
  return r;
}

oracle::Mat as_mat(const MatrixD& m) {
  oracle::Mat out(m.rows(), oracle::Vec(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

TEST(AttentionMi, UniformIsZero) {
  EXPECT_NEAR(attention_mi(record(196, 1.0 / 196)), 0.0, 1e-12);
}

TEST(AttentionMi, IdentityIsLogN) {
  AttentionRecord r = record(196);
  for (std::size_t i = 0; i < 196; ++i) r.matrix(i, i) = 1.0;
  EXPECT_NEAR(attention_mi(r), std::log(196.0), 1e-9);
}

TEST(AttentionMi, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const AttentionRecord r = random_stochastic(8, rng);
    EXPECT_NEAR(attention_mi(r), oracle::naive_attention_mi(as_mat(r.matrix)), 1e-12);
  }
}

TEST(AttentionMi, BoundsAndPermutationInvariance) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    const AttentionRecord r = random_stochastic(n, rng);
    const double mi = attention_mi(r);
    EXPECT_GE(mi, 0.0);
    EXPECT_LE(mi, std::log(static_cast<double>(n)) + 1e-12);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    AttentionRecord p = record(n);
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t k = 0; k < n; ++k) p.matrix(perm[q], perm[k]) = r.matrix(q, k);
    }
    EXPECT_NEAR(attention_mi(p), mi, 1e-12);
  }
}

TEST(AttentionMi, RejectsBadRows) {
  AttentionRecord r = record(3, 1.0 / 3);
  r.matrix(1, 1) += 1e-3;
  EXPECT_ERROR_KIND(attention_mi(r), ErrorKind::kData);
  AttentionRecord neg = record(2, 0.5);
  neg.matrix(0, 0) = -0.5;
  neg.matrix(0, 1) = 1.5;
  EXPECT_ERROR_KIND(check_attention(neg), ErrorKind::kData);
  // Within tolerance is accepted.
  AttentionRecord close = record(2, 0.5);
  close.matrix(0, 0) += 5e-5;
  EXPECT_NO_THROW(check_attention(close));
}

TEST(Percentile, LinearInterpolation) {
  const std::vector<double> v = {4, 1, 3, 2, 5};
  EXPECT_DOUBLE_EQ(percentile(v, 50), 3.0);
  EXPECT_DOUBLE_EQ(percentile(v, 25), 2.0);
  EXPECT_DOUBLE_EQ(percentile(v, 10), 1.4);
  EXPECT_ERROR_KIND(percentile(v, 100), ErrorKind::kInput);
  EXPECT_ERROR_KIND(percentile(std::vector<double>{}, 50), ErrorKind::kInput);
}

TEST(Binarize, ConstantMatrixIsEmpty) {
  const auto mask = binarize_attention(record(7, 1.0 / 7), 95);
  for (auto v : mask.values()) EXPECT_EQ(v, 0);
}

TEST(Binarize, FiveOnesOfHundred) {
  AttentionRecord r = record(10);
  const std::size_t ones[5] = {3, 17, 42, 58, 99};
  for (auto i : ones) r.matrix.values()[i] = 1.0;
  const auto mask = binarize_attention(r, 95);
  // Rank 0.95 * 99 = 94.05 falls among the zeros, so the threshold is 0.
  for (std::size_t i = 0; i < 100; ++i) {
    const bool expected = std::find(std::begin(ones), std::end(ones), i) != std::end(ones);
    EXPECT_EQ(mask.values()[i], expected ? 1 : 0) << i;
  }
}

TEST(Binarize, IdentityKeepsDiagonal) {
  AttentionRecord r = record(196);
  for (std::size_t i = 0; i < 196; ++i) r.matrix(i, i) = 1.0;
  const auto mask = binarize_attention(r, 95);
  std::size_t set = 0;
  for (std::size_t i = 0; i < 196; ++i) {
    for (std::size_t j = 0; j < 196; ++j) {
      set += mask(i, j);
      if (mask(i, j)) EXPECT_EQ(i, j);
    }
  }
  EXPECT_EQ(set, 196u);
}

TEST(Binarize, IdempotentOnBinaryMatrices) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    AttentionRecord r = record(10);
    std::size_t ones = 0;
    for (auto& v : r.matrix.values()) {
      v = rng() % 4 == 0 ? 1.0 : 0.0;
      ones += v > 0 ? 1 : 0;
    }
    if (ones == 0) continue;
    const double below = 100.0 * (1.0 - static_cast<double>(ones) / 100.0);
    for (double pct : {below * 0.5, below * 0.9}) {
      if (pct <= 0.0) continue;
      const auto mask = binarize_attention(r, pct);
      for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(mask.values()[i], r.matrix.values()[i] > 0 ? 1 : 0);
    }
  }
}

TEST(LayerProfile, MeansGapsAndOracle) {
  std::map<int, std::vector<double>> by_layer;
  by_layer[1] = {0.7};
  by_layer[2] = {0.0, std::log(196.0)};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    by_layer[4].push_back(u(rng));
    sum += by_layer[4].back();
  }
  const std::vector<int> expected = {1, 2, 3, 4};
  const auto profile = layer_profile(by_layer, expected);
  ASSERT_EQ(profile.size(), 4u);
  EXPECT_DOUBLE_EQ(*profile[0].mean_mi, 0.7);
  EXPECT_NEAR(*profile[1].mean_mi, std::log(196.0) / 2.0, 1e-15);
  EXPECT_FALSE(profile[2].mean_mi.has_value());
  EXPECT_NEAR(*profile[3].mean_mi, sum / 10.0, 1e-12);
  const auto j = layer_profile_json(profile);
  EXPECT_EQ(j["gaps"], nlohmann::json::array({3}));
}

}  // namespace
}  // namespace repprobe
