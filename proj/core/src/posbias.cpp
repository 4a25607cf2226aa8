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

#include "repprobe/posbias.hpp"

#include <algorithm>
#include <cmath>

namespace repprobe {

std::string to_string(LabelSource source) {
  return source == LabelSource::kGroundTruth ? "gt" : "pred";
}

SpatialCounts::SpatialCounts(std::size_t classes, GridSize grid, LabelSource source)
    : classes_(classes), grid_(grid), source_(source), counts_(classes * grid.cells(), 0) {
  if (grid.rows == 0 || grid.cols == 0) fail(ErrorKind::kInput, "position grid must be >= 1x1");
  if (classes == 0) fail(ErrorKind::kInput, "class count must be >= 1");
}

void SpatialCounts::add(const LabelMap& labels) {
  const GridSize size{labels.height, labels.width};
  if (image_size_ && !(*image_size_ == size)) {
    fail(ErrorKind::kShape, "label maps have mixed resolutions");
  }
  image_size_ = size;
  const std::size_t cells = grid_.cells();
  for (std::size_t i = 0; i < labels.height; ++i) {
    const std::size_t gy = i * grid_.rows / labels.height;
    for (std::size_t j = 0; j < labels.width; ++j) {
      const auto v = labels.at(i, j);
      if (v == labels.ignore_index) continue;
      if (v < 0 || static_cast<std::size_t>(v) >= classes_) {
        fail(ErrorKind::kData, "label " + std::to_string(v) + " outside [0, " +
                                   std::to_string(classes_) + ")");
      }
      const std::size_t gx = j * grid_.cols / labels.width;
      ++counts_[static_cast<std::size_t>(v) * cells + gy * grid_.cols + gx];
      ++total_;
    }
  }
}

void SpatialCounts::recount() {
  total_ = 0;
  for (auto v : counts_) total_ += v;
}

SpatialCounts& SpatialCounts::operator+=(const SpatialCounts& other) {
  if (other.classes_ != classes_ || !(other.grid_ == grid_)) {
    fail(ErrorKind::kShape, "cannot merge spatial counts of different shape");
  }
  if (image_size_ && other.image_size_ && !(*image_size_ == *other.image_size_)) {
    fail(ErrorKind::kShape, "label maps have mixed resolutions");
  }
  if (!image_size_) image_size_ = other.image_size_;
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

SpatialCounts accumulate_positions(std::span<const LabelMap> maps, GridSize grid,
                                   std::size_t classes, LabelSource source) {
  SpatialCounts counts(classes, grid, source);
  for (const auto& m : maps) counts.add(m);
  return counts;
}

ClassMi class_mi(const SpatialCounts& counts, std::size_t c) {
  if (counts.total() == 0) fail(ErrorKind::kInput, "spatial counts are empty");
  if (c >= counts.classes()) fail(ErrorKind::kInput, "class " + std::to_string(c) + " out of range");
  const std::size_t cells = counts.grid().cells();
  const double total = static_cast<double>(counts.total());

  std::uint64_t class_total = 0;
  for (std::size_t p = 0; p < cells; ++p) class_total += counts.at(c, p);
  if (class_total == 0) return {0.0, true};

  // Work in counts: P(p,c)/(P(p)P(c)) = N(p,c) * N / (N(p) * N(c)).
  double mi = 0.0;
  for (std::size_t p = 0; p < cells; ++p) {
    const std::uint64_t npc = counts.at(c, p);
    if (npc == 0) continue;
    std::uint64_t np = 0;
    for (std::size_t k = 0; k < counts.classes(); ++k) np += counts.at(k, p);
    const double ratio = (static_cast<double>(npc) * total) /
                         (static_cast<double>(np) * static_cast<double>(class_total));
    mi += (static_cast<double>(npc) / total) * std::log(ratio);
  }
  return {std::max(mi, 0.0), false};
}

PositionalReport global_nmi(const SpatialCounts& counts) {
  if (counts.total() == 0) fail(ErrorKind::kInput, "spatial counts are empty");
  PositionalReport r;
  r.grid = counts.grid();
  r.source = counts.source();
  r.per_class_mi.resize(counts.classes());
  r.absent.resize(counts.classes());
  const double total = static_cast<double>(counts.total());
  std::size_t present = 0;
  for (std::size_t c = 0; c < counts.classes(); ++c) {
    const ClassMi mi = class_mi(counts, c);
    r.per_class_mi[c] = mi.value;
    r.absent[c] = mi.absent;
    r.global_mi += mi.value;
    if (mi.absent) continue;
    ++present;
    std::uint64_t nc = 0;
    for (std::size_t p = 0; p < counts.grid().cells(); ++p) nc += counts.at(c, p);
    const double pc = static_cast<double>(nc) / total;
    r.entropy -= pc * std::log(pc);
  }
  if (present > 1 && r.entropy > 0.0) r.nmi = r.global_mi / r.entropy;
  return r;
}

std::vector<std::pair<std::size_t, double>> PositionalReport::ranked(std::size_t top_m) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t c = 0; c < per_class_mi.size(); ++c) {
    if (!absent[c]) out.emplace_back(c, per_class_mi[c]);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > top_m) out.resize(top_m);
  return out;
}

nlohmann::json PositionalReport::to_json(std::size_t top_m) const {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& [c, mi] : ranked(top_m)) per_class.push_back({{"class", c}, {"mi", mi}});
  return {{"grid", {grid.rows, grid.cols}},
          {"per_class_mi", per_class},
          {"global_mi", global_mi},
          {"entropy", entropy},
          {"nmi", nmi ? nlohmann::json(*nmi) : nlohmann::json(nullptr)},
          {"degenerate_flag", degenerate()},
          {"source", to_string(source)}};
}

}  // namespace repprobe
