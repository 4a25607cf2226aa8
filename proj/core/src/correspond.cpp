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

#include "repprobe/correspond.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace repprobe {
namespace {

void check_query(const DenseFeatureMap& map, Point p, const char* role) {
  if (p.x < 0 || p.y < 0 || static_cast<std::size_t>(p.x) >= map.width ||
      static_cast<std::size_t>(p.y) >= map.height) {
    fail(ErrorKind::kInput, std::string(role) + " point (" + std::to_string(p.x) + ", " +
                                std::to_string(p.y) + ") outside the image");
  }
}

std::vector<double> query_unit(const DenseFeatureMap& source, const DenseFeatureMap& target, Point q) {
  if (source.dim() != target.dim()) fail(ErrorKind::kShape, "source and target feature dimensions differ");
  check_query(source, q, "source");
  const auto f = source.at(static_cast<std::size_t>(q.y), static_cast<std::size_t>(q.x));
  double n = 0.0;
  for (float v : f) n += static_cast<double>(v) * v;
  n = std::sqrt(n);
  if (n == 0.0) {
    fail(ErrorKind::kDegenerate, "undefined match: zero source feature at (" + std::to_string(q.x) +
                                     ", " + std::to_string(q.y) + ")");
  }
  std::vector<double> u(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) u[j] = f[j] / n;
  return u;
}

double cosine_to(std::span<const double> unit, std::span<const float> g) {
  double dot = 0.0;
  double nn = 0.0;
  for (std::size_t j = 0; j < unit.size(); ++j) {
    dot += unit[j] * g[j];
    nn += static_cast<double>(g[j]) * g[j];
  }
  return nn == 0.0 ? 0.0 : dot / std::sqrt(nn);
}

Point point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::kFormat, "points must be [x, y]");
  return {static_cast<int>(std::lround(j[0].get<double>())),
          static_cast<int>(std::lround(j[1].get<double>()))};
}

}  // namespace

KeypointPair keypoint_pair_from_json(const nlohmann::json& doc) {
  KeypointPair p;
  try {
    p.source_id = doc.at("source").get<std::string>();
    p.target_id = doc.at("target").get<std::string>();
    p.source = point_from_json(doc.at("source_point"));
    p.target = point_from_json(doc.at("target_point"));
    const auto& box = doc.at("target_bbox");
    if (!box.is_array() || box.size() != 4) fail(ErrorKind::kFormat, "target_bbox must be [x, y, w, h]");
    p.target_box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                    box[3].get<double>()};
    p.category = doc.value("category", std::string{});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("keypoint pair: ") + e.what());
  }
  if (!(p.target_box.width > 0.0 && p.target_box.height > 0.0)) {
    fail(ErrorKind::kData, "keypoint bounding box must have positive width and height");
  }
  return p;
}

nlohmann::json keypoint_pair_to_json(const KeypointPair& p) {
  return {{"source", p.source_id},
          {"target", p.target_id},
          {"source_point", {p.source.x, p.source.y}},
          {"target_point", {p.target.x, p.target.y}},
          {"target_bbox", {p.target_box.x, p.target_box.y, p.target_box.width, p.target_box.height}},
          {"category", p.category}};
}

std::vector<KeypointPair> read_keypoint_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<KeypointPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      pairs.push_back(keypoint_pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void write_keypoint_pairs(std::span<const KeypointPair> pairs, const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : pairs) text += keypoint_pair_to_json(p).dump() + "\n";
  write_text(text, path);
}

Point match_point(const DenseFeatureMap& source, const DenseFeatureMap& target, Point query) {
  const auto unit = query_unit(source, target, query);
  std::size_t best_index = 0;
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t pixels = target.height * target.width;
  for (std::size_t px = 0; px < pixels; ++px) {
    const double s = cosine_to(unit, target.features.row(px));
    if (s > best) {
      best = s;
      best_index = px;
    }
  }
  return {static_cast<int>(best_index % target.width), static_cast<int>(best_index / target.width)};
}

std::vector<double> similarity_heatmap(const DenseFeatureMap& source, const DenseFeatureMap& target,
                                       Point query) {
  const auto unit = query_unit(source, target, query);
  std::vector<double> heat(target.height * target.width);
  for (std::size_t px = 0; px < heat.size(); ++px) heat[px] = cosine_to(unit, target.features.row(px));
  const auto [lo, hi] = std::minmax_element(heat.begin(), heat.end());
  const double a = *lo;
  const double range = *hi - *lo;
  for (auto& h : heat) h = range > 0.0 ? (h - a) / range : 0.0;
  return heat;
}

PckResult pck(std::span<const PredictedKeypoint> points, double alpha) {
  if (points.empty()) fail(ErrorKind::kInput, "no keypoints to score");
  if (!(alpha >= 0.0)) fail(ErrorKind::kInput, "alpha must be >= 0");
  PckResult result;
  result.alpha = alpha;
  result.n_points = points.size();
  std::size_t correct = 0;
  for (const auto& p : points) {
    const double dx = p.prediction.x - p.pair.target.x;
    const double dy = p.prediction.y - p.pair.target.y;
    const double radius = alpha * std::max(p.pair.target_box.width, p.pair.target_box.height);
    const bool ok = std::hypot(dx, dy) <= radius;
    auto& cat = result.per_category[p.pair.category];
    ++cat.total;
    if (ok) {
      ++cat.correct;
      ++correct;
    }
  }
  result.pck = static_cast<double>(correct) / static_cast<double>(points.size());
  return result;
}

nlohmann::json PckResult::to_json() const {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, s] : per_category) {
    cats[name] = {{"pck", s.pck()}, {"correct", s.correct}, {"n_points", s.total}};
  }
  return {{"pck", pck}, {"per_category", cats}, {"alpha", alpha}, {"n_points", n_points}};
}

}  // namespace repprobe
