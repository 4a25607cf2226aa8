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

#include "repprobe/evalseg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace repprobe {

Contingency::Contingency(std::size_t clusters, std::size_t classes)
    : clusters_(clusters), classes_(classes), counts_(clusters * classes, 0) {}

Contingency::Contingency(std::size_t clusters, std::size_t classes, std::vector<std::uint64_t> counts)
    : clusters_(clusters), classes_(classes), counts_(std::move(counts)) {
  if (counts_.size() != clusters_ * classes_) fail(ErrorKind::kShape, "contingency storage mismatch");
}

std::uint64_t Contingency::counted_pixels() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void Contingency::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    fail(ErrorKind::kShape, "prediction " + std::to_string(pred.height) + "x" +
                                std::to_string(pred.width) + " vs ground truth " +
                                std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const auto g = gt.values[i];
    if (g == gt.ignore_index) {
      ++ignored_;
      continue;
    }
    if (g < 0 || static_cast<std::size_t>(g) >= classes_) {
      fail(ErrorKind::kData, "ground-truth label " + std::to_string(g) + " outside [0, " +
                                 std::to_string(classes_) + ")");
    }
    const auto p = pred.values[i];
    if (p < 0 || static_cast<std::size_t>(p) >= clusters_) {
      fail(ErrorKind::kData, "predicted cluster " + std::to_string(p) + " outside [0, " +
                                 std::to_string(clusters_) + ")");
    }
    ++counts_[static_cast<std::size_t>(p) * classes_ + static_cast<std::size_t>(g)];
  }
}

Contingency& Contingency::operator+=(const Contingency& other) {
  if (other.clusters_ != clusters_ || other.classes_ != classes_) {
    fail(ErrorKind::kShape, "cannot merge contingencies of different shape");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
  return *this;
}

nlohmann::json MatchResult::to_json() const {
  nlohmann::json iou = nlohmann::json::array();
  for (double v : per_class_iou) {
    iou.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  }
  return {{"permutation", mapping},
          {"per_class_iou", iou},
          {"miou", miou},
          {"matched_tp", matched_tp},
          {"ignored_pixels", ignored_pixels}};
}

std::vector<std::size_t> max_weight_assignment(const std::vector<std::uint64_t>& weights,
                                               std::size_t n) {
  if (weights.size() != n * n) fail(ErrorKind::kShape, "assignment matrix must be n x n");
  if (n == 0) return {};
  // Minimize (max - w), which is nonnegative and exact in int64.
  const std::uint64_t top = *std::max_element(weights.begin(), weights.end());
  if (top > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max() / 4)) {
    fail(ErrorKind::kData, "counts too large for exact assignment");
  }
  auto cost = [&](std::size_t i, std::size_t j) {
    return static_cast<std::int64_t>(top - weights[i * n + j]);
  };
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 2;
  // 1-based potentials; column 0 is the virtual start.
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[owner[j] - 1] = j - 1;
  return row_to_col;
}

MatchResult score_mapping(const Contingency& table, std::vector<std::int32_t> mapping) {
  const std::size_t k_count = table.clusters();
  const std::size_t c_count = table.classes();
  if (mapping.size() != k_count) fail(ErrorKind::kShape, "mapping must cover every cluster");

  // merged[p][g]: pixels predicted as class p (after mapping) with gt class g.
  std::vector<std::uint64_t> merged(c_count * c_count, 0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto p = mapping[k];
    if (p < 0 || static_cast<std::size_t>(p) >= c_count) {
      fail(ErrorKind::kData, "mapping sends cluster " + std::to_string(k) + " outside the class range");
    }
    for (std::size_t g = 0; g < c_count; ++g) merged[p * c_count + g] += table.at(k, g);
  }

  MatchResult result;
  result.mapping = std::move(mapping);
  result.ignored_pixels = table.ignored_pixels();
  result.per_class_iou.assign(c_count, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    const std::uint64_t tp = merged[c * c_count + c];
    std::uint64_t predicted = 0;
    std::uint64_t actual = 0;
    for (std::size_t o = 0; o < c_count; ++o) {
      predicted += merged[c * c_count + o];
      actual += merged[o * c_count + c];
    }
    result.matched_tp += tp;
    const std::uint64_t uni = predicted + actual - tp;  // TP + FP + FN
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    result.per_class_iou[c] = iou;
    sum += iou;
    ++present;
  }
  result.miou = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return result;
}

MatchResult hungarian_match(const Contingency& table) {
  if (table.clusters() != table.classes()) {
    fail(ErrorKind::kUnsupported, "hungarian_match needs K == C (K=" +
                                      std::to_string(table.clusters()) + ", C=" +
                                      std::to_string(table.classes()) +
                                      "); use map_many_to_one for K > C");
  }
  const auto assignment = max_weight_assignment(table.counts(), table.clusters());
  std::vector<std::int32_t> mapping(assignment.begin(), assignment.end());
  return score_mapping(table, std::move(mapping));
}

MatchResult map_many_to_one(const Contingency& table) {
  if (table.clusters() < table.classes()) {
    fail(ErrorKind::kUnsupported, "map_many_to_one needs K >= C");
  }
  std::vector<std::int32_t> mapping(table.clusters(), 0);
  for (std::size_t k = 0; k < table.clusters(); ++k) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < table.classes(); ++c) {
      if (table.at(k, c) > table.at(k, best)) best = c;
    }
    mapping[k] = static_cast<std::int32_t>(best);
  }
  return score_mapping(table, std::move(mapping));
}

MatchResult match_clusters(const Contingency& table) {
  if (table.clusters() == table.classes()) return hungarian_match(table);
  if (table.clusters() > table.classes()) return map_many_to_one(table);
  fail(ErrorKind::kUnsupported, "fewer clusters than classes (K=" +
                                    std::to_string(table.clusters()) + ", C=" +
                                    std::to_string(table.classes()) + ")");
}

LabelMap apply_mapping(const LabelMap& pred, const std::vector<std::int32_t>& mapping) {
  LabelMap out = pred;
  for (auto& v : out.values) {
    if (v == pred.ignore_index && (v < 0 || static_cast<std::size_t>(v) >= mapping.size())) continue;
    if (v < 0 || static_cast<std::size_t>(v) >= mapping.size()) {
      fail(ErrorKind::kData, "cluster " + std::to_string(v) + " has no mapping");
    }
    v = mapping[static_cast<std::size_t>(v)];
  }
  return out;
}

}  // namespace repprobe
