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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "oracles.hpp"
#include "repprobe/correspond.hpp"
#include "synthetic.hpp"

namespace repprobe {
namespace {

namespace oracle = testing::oracle;

DenseFeatureMap field(std::size_t h, std::size_t w, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  DenseFeatureMap m;
  m.height = h;
  m.width = w;
  m.features = MatrixF(h * w, d);
  for (auto& v : m.features.values()) v = n(rng);
  return m;
}

KeypointPair pair_at(Point gt, double w, double h, std::string category = "cat") {
  KeypointPair p;
  p.source_id = "a";
  p.target_id = "b";
  p.target = gt;
  p.target_box = {0, 0, w, h};
  p.category = std::move(category);
  return p;
}

TEST(MatchPoint, SelfMatchWithDistinctFeatures) {
  std::mt19937_64 rng(1);
  const DenseFeatureMap f = field(6, 7, 5, rng);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) EXPECT_EQ(match_point(f, f, {x, y}), (Point{x, y}));
  }
}

TEST(MatchPoint, ScaleInvariance) {
  std::mt19937_64 rng(2);
  const DenseFeatureMap s = field(5, 5, 4, rng);
  const DenseFeatureMap t = field(5, 5, 4, rng);
  DenseFeatureMap t2 = t, s3 = s;
  for (auto& v : t2.features.values()) v *= 2.0f;
  for (auto& v : s3.features.values()) v *= 0.3f;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      const Point p = match_point(s, t, {x, y});
      EXPECT_EQ(match_point(s, t2, {x, y}), p);
      EXPECT_EQ(match_point(s3, t, {x, y}), p);
    }
  }
}

TEST(MatchPoint, PlantedMatchEqualsExhaustiveScan) {
  std::mt19937_64 rng(3);
  DenseFeatureMap s = field(8, 8, 4, rng);
  DenseFeatureMap t = field(8, 8, 4, rng);
  // Plant the query's exact feature at row 3, column 5 of the target.
  const Point query{1, 6};
  for (std::size_t j = 0; j < 4; ++j) t.features(3 * 8 + 5, j) = 4.0f * s.at(6, 1)[j];
  const Point got = match_point(s, t, query);
  EXPECT_EQ(got, (Point{5, 3}));

  const oracle::Vec q(s.at(6, 1).begin(), s.at(6, 1).end());
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t px = 0; px < 64; ++px) {
    const double sim = oracle::cosine(q, oracle::Vec(t.features.row(px).begin(), t.features.row(px).end()));
    if (sim > best_sim) {
      best_sim = sim;
      best = px;
    }
  }
  EXPECT_EQ(got, (Point{static_cast<int>(best % 8), static_cast<int>(best / 8)}));
}

TEST(MatchPoint, ZeroSourceAndOutOfBounds) {
  std::mt19937_64 rng(4);
  DenseFeatureMap s = field(3, 3, 2, rng);
  const DenseFeatureMap t = field(3, 3, 2, rng);
  s.features(4, 0) = s.features(4, 1) = 0.0f;
  EXPECT_ERROR_KIND(match_point(s, t, {1, 1}), ErrorKind::kDegenerate);
  EXPECT_ERROR_KIND(match_point(s, t, {3, 0}), ErrorKind::kInput);
}

TEST(Heatmap, ScaledToUnitRange) {
  std::mt19937_64 rng(5);
  const DenseFeatureMap s = field(4, 4, 3, rng);
  const auto heat = similarity_heatmap(s, s, {2, 1});
  ASSERT_EQ(heat.size(), 16u);
  EXPECT_DOUBLE_EQ(heat[1 * 4 + 2], 1.0);
  EXPECT_DOUBLE_EQ(*std::min_element(heat.begin(), heat.end()), 0.0);
}

TEST(Pck, ConstructedFractions) {
  std::vector<PredictedKeypoint> all, half, none;
  for (int i = 0; i < 10; ++i) {
    const auto p = pair_at({20, 20}, 50, 40);  // threshold 0.1 * 50 = 5 px
    all.push_back({p, {20, 20}});
    half.push_back({p, i < 5 ? Point{20, 20} : Point{26, 20}});
    none.push_back({p, {20, 30}});
  }
  EXPECT_EQ(pck(all).pck, 1.0);
  EXPECT_EQ(pck(half).pck, 0.5);
  EXPECT_EQ(pck(none).pck, 0.0);
  EXPECT_EQ(pck(half).n_points, 10u);
  EXPECT_DOUBLE_EQ(pck(all).alpha, 0.1);
}

TEST(Pck, BoundaryIsInclusiveAndUsesLongerSide) {
  const auto p = pair_at({0, 0}, 30, 50);  // threshold 5 px
  const std::vector<PredictedKeypoint> on = {{p, {3, 4}}};
  const std::vector<PredictedKeypoint> off = {{p, {4, 4}}};
  EXPECT_EQ(pck(on).pck, 1.0);
  EXPECT_EQ(pck(off).pck, 0.0);
}

TEST(Pck, MonotoneInAlphaAndSaturates) {
  std::mt19937_64 rng(6);
  std::vector<PredictedKeypoint> pts;
  for (int i = 0; i < 50; ++i) {
    const auto p = pair_at({static_cast<int>(rng() % 64), static_cast<int>(rng() % 48)}, 64, 48,
                           i % 3 == 0 ? "x" : "y");
    pts.push_back({p, {static_cast<int>(rng() % 64), static_cast<int>(rng() % 48)}});
  }
  double prev = 0.0;
  for (double a = 0.0; a <= 1.0; a += 0.05) {
    const double v = pck(pts, a).pck;
    EXPECT_GE(v, prev);
    prev = v;
  }
  // The image diagonal is at most sqrt(2) * longest side.
  EXPECT_EQ(pck(pts, 1.5).pck, 1.0);
  const auto r = pck(pts, 0.2);
  std::size_t total = 0;
  for (const auto& [name, score] : r.per_category) total += score.total;
  EXPECT_EQ(total, 50u);
  EXPECT_ERROR_KIND(pck(std::vector<PredictedKeypoint>{}), ErrorKind::kInput);
}

TEST(KeypointFile, JsonlRoundTrip) {
  testing::TempDir dir;
  std::vector<KeypointPair> pairs = {pair_at({1, 2}, 10, 20, "dog"), pair_at({5, 6}, 7, 8, "cat")};
  pairs[1].source = {3, 4};
  write_keypoint_pairs(pairs, dir / "kp.jsonl");
  const auto back = read_keypoint_pairs(dir / "kp.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(keypoint_pair_to_json(back[i]), keypoint_pair_to_json(pairs[i]));
  }
  EXPECT_EQ(back[1].source, (Point{3, 4}));
  EXPECT_ERROR_KIND(keypoint_pair_from_json(nlohmann::json{{"source", "a"}}), ErrorKind::kFormat);
}

}  // namespace
}  // namespace repprobe
