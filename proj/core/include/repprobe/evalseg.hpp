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
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/tensorio.hpp"

namespace repprobe {

/// K x C pixel co-occurrences of (predicted cluster, ground-truth class).
/// Contingencies from disjoint shards merge by addition.
class Contingency {
 public:
  Contingency() = default;
  Contingency(std::size_t clusters, std::size_t classes);
  Contingency(std::size_t clusters, std::size_t classes, std::vector<std::uint64_t> counts);

  std::size_t clusters() const { return clusters_; }
  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t k, std::size_t c) const { return counts_[k * classes_ + c]; }
  std::uint64_t& at(std::size_t k, std::size_t c) { return counts_[k * classes_ + c]; }
  std::uint64_t ignored_pixels() const { return ignored_; }
  std::uint64_t counted_pixels() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// Each non-ignored gt pixel increments counts[pred, gt].
  void accumulate(const LabelMap& pred, const LabelMap& gt);

  Contingency& operator+=(const Contingency& other);

 private:
  std::size_t clusters_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

struct MatchResult {
  std::vector<std::int32_t> mapping;  // cluster -> class
  std::vector<double> per_class_iou;  // NaN for classes absent from the union
  double miou = 0.0;
  std::uint64_t matched_tp = 0;
  std::uint64_t ignored_pixels = 0;

  nlohmann::json to_json() const;
};

/// Exact maximum-weight perfect matching on a square integer matrix; returns
/// row -> column. Kuhn-Munkres with integer potentials, O(n^3).
std::vector<std::size_t> max_weight_assignment(const std::vector<std::uint64_t>& weights,
                                               std::size_t n);

/// K == C: permutation maximizing total matched pixels, then IoU per class.
MatchResult hungarian_match(const Contingency& table);

/// K > C: each cluster maps to its majority class (lowest id on ties).
MatchResult map_many_to_one(const Contingency& table);

/// Dispatches on K vs C.
MatchResult match_clusters(const Contingency& table);

/// IoU per class and mIoU for an arbitrary cluster -> class mapping.
MatchResult score_mapping(const Contingency& table, std::vector<std::int32_t> mapping);

/// Relabels predictions through a cluster -> class mapping.
LabelMap apply_mapping(const LabelMap& pred, const std::vector<std::int32_t>& mapping);

}  // namespace repprobe
