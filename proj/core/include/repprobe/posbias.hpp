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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/manifest.hpp"
#include "repprobe/tensorio.hpp"

namespace repprobe {

enum class LabelSource { kPrediction, kGroundTruth };
std::string to_string(LabelSource source);

/// N(p, c): occurrences of class c in position cell p over all label maps.
/// Pixel (i, j) of an H x W map falls in cell (floor(i*G_h/H), floor(j*G_w/W)).
/// Accumulators over disjoint image sets merge by addition.
class SpatialCounts {
 public:
  SpatialCounts() = default;
  SpatialCounts(std::size_t classes, GridSize grid, LabelSource source = LabelSource::kPrediction);

  std::size_t classes() const { return classes_; }
  GridSize grid() const { return grid_; }
  LabelSource source() const { return source_; }
  std::uint64_t total() const { return total_; }

  std::uint64_t at(std::size_t c, std::size_t cell) const { return counts_[c * grid_.cells() + cell]; }
  std::uint64_t& at(std::size_t c, std::size_t cell) { return counts_[c * grid_.cells() + cell]; }

  /// Adds one map; ignore pixels are skipped. All maps must share H x W.
  void add(const LabelMap& labels);

  /// Recomputes the total after direct edits through at().
  void recount();

  SpatialCounts& operator+=(const SpatialCounts& other);

 private:
  std::size_t classes_ = 0;
  GridSize grid_;
  LabelSource source_ = LabelSource::kPrediction;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::optional<GridSize> image_size_;
};

SpatialCounts accumulate_positions(std::span<const LabelMap> maps, GridSize grid,
                                   std::size_t classes,
                                   LabelSource source = LabelSource::kPrediction);

struct ClassMi {
  double value = 0.0;  // nats
  bool absent = false;
};

/// I_c = sum_p P(p,c) ln[P(p,c) / (P(p) P(c))], clamped at 0 for round-off.
ClassMi class_mi(const SpatialCounts& counts, std::size_t c);

struct PositionalReport {
  GridSize grid;
  LabelSource source = LabelSource::kPrediction;
  std::vector<double> per_class_mi;
  std::vector<bool> absent;
  double global_mi = 0.0;
  double entropy = 0.0;
  std::optional<double> nmi;  // empty when H(C) == 0

  bool degenerate() const { return !nmi.has_value(); }

  /// (class, I_c) pairs, descending by I_c, ties by class id; absent classes
  /// are omitted.
  std::vector<std::pair<std::size_t, double>> ranked(std::size_t top_m = SIZE_MAX) const;

  nlohmann::json to_json(std::size_t top_m = SIZE_MAX) const;
};

/// Global MI, class entropy H(C) (nats) and NMI = I / H(C).
PositionalReport global_nmi(const SpatialCounts& counts);

}  // namespace repprobe
