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

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/densify.hpp"

namespace repprobe {

/// Pixel coordinate; x is the column, y the row.
struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
};

struct KeypointPair {
  std::string source_id;
  std::string target_id;
  Point source;
  Point target;  // ground truth
  BoundingBox target_box;
  std::string category;
};

/// One JSON object per line:
/// {"source": id, "target": id, "source_point": [x, y], "target_point": [x, y],
///  "target_bbox": [x, y, w, h], "category": "..."}
std::vector<KeypointPair> read_keypoint_pairs(const std::filesystem::path& path);
nlohmann::json keypoint_pair_to_json(const KeypointPair& pair);
KeypointPair keypoint_pair_from_json(const nlohmann::json& doc);
void write_keypoint_pairs(std::span<const KeypointPair> pairs, const std::filesystem::path& path);

/// Target pixel with the highest cosine similarity to the source feature at
/// `query`; ties resolve to the smallest row-major index.
Point match_point(const DenseFeatureMap& source, const DenseFeatureMap& target, Point query);

/// Cosine similarity of `query` against every target pixel, min-max scaled
/// to [0, 1] (all zeros when constant). Row-major H x W.
std::vector<double> similarity_heatmap(const DenseFeatureMap& source, const DenseFeatureMap& target,
                                       Point query);

struct PredictedKeypoint {
  KeypointPair pair;
  Point prediction;
};

struct CategoryScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double pck() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct PckResult {
  double pck = 0.0;
  double alpha = 0.1;
  std::size_t n_points = 0;
  std::map<std::string, CategoryScore> per_category;

  nlohmann::json to_json() const;
};

/// A prediction is correct when its distance to the ground truth is at most
/// alpha * max(bbox width, bbox height). Averaged per point.
PckResult pck(std::span<const PredictedKeypoint> points, double alpha = 0.1);

}  // namespace repprobe
