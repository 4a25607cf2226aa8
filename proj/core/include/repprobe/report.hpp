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
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/image.hpp"
#include "repprobe/manifest.hpp"
#include "repprobe/matrix.hpp"
#include "repprobe/tensorio.hpp"

namespace repprobe {

// ---------------------------------------------------------------------------
// Aggregate maps

/// Normalized per-pixel class weights and their palette blend.
struct AggregateMap {
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> weights;  // classes x H x W, each pixel sums to 1 (or 0 if never labeled)
  std::vector<double> blend;    // H x W x 3, in [0, 255]

  double weight(std::size_t k, std::size_t r, std::size_t c) const {
    return weights[(k * height + r) * width + c];
  }
  Image to_image() const;
};

/// Per-pixel class frequencies summed over a set of maps. Hard mode adds
/// one-hot label maps; soft mode adds per-pixel class probabilities.
class AggregateAccumulator {
 public:
  AggregateAccumulator(std::size_t classes, std::size_t height, std::size_t width);

  void add_hard(const LabelMap& labels);
  /// `probabilities` is classes x (H*W).
  void add_soft(const MatrixF& probabilities);

  std::size_t images() const { return images_; }
  std::size_t classes() const { return classes_; }

  /// Folds cluster planes into class planes through a cluster -> class map.
  AggregateAccumulator remap(const std::vector<std::int32_t>& mapping, std::size_t classes) const;

  AggregateMap finalize(const Palette& palette) const;

  AggregateAccumulator& operator+=(const AggregateAccumulator& other);

 private:
  std::size_t classes_;
  std::size_t height_;
  std::size_t width_;
  std::vector<double> sums_;
  std::size_t images_ = 0;
};

AggregateMap aggregate_map(std::span<const LabelMap> maps, const Palette& palette);

// ---------------------------------------------------------------------------
// Panels

using PanelCell = std::variant<LabelMap, Image>;

struct PanelLayout {
  std::size_t rows = 1;
  std::size_t cols = 1;
  bool captions = false;
};

inline constexpr std::size_t kCaptionStripHeight = kGlyphHeight + 2;

/// Size of one montage cell (tile plus caption strip, when enabled).
GridSize panel_tile_size(std::size_t tile_height, std::size_t tile_width, const PanelLayout& layout);

/// Row-major grid montage. Label maps are colorized with the palette (ignore
/// pixels black); all cells must share one size.
Image render_panel(std::span<const PanelCell> cells, const Palette& palette, const PanelLayout& layout,
                   std::span<const std::string> captions = {});

// ---------------------------------------------------------------------------
// Correlation

struct Correlation {
  std::optional<double> pearson;   // empty when a series has zero variance
  std::optional<double> spearman;
  std::size_t n = 0;
  bool log_x = false;

  nlohmann::json to_json() const;
};

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

Correlation correlate(std::span<const double> x, std::span<const double> y, bool log_x = false);

// ---------------------------------------------------------------------------
// Metrics records and sweeps

struct MetricsRecord {
  std::string model;
  std::string size;
  std::string kind;
  int layer = 0;
  std::optional<double> miou;
  std::optional<double> nmi;
  std::optional<double> ikq;
  std::optional<double> pck;
  nlohmann::json provenance = nlohmann::json::object();

  /// Throws kData when a metric leaves its range.
  void validate() const;
  nlohmann::json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& doc);
};

inline constexpr const char* kMetricsCsvHeader = "model,size,kind,layer,miou,nmi,ikq,pck";

std::string metrics_csv(std::span<const MetricsRecord> records);

struct BestLayer {
  std::string model;
  std::string size;
  std::string kind;
  int layer = 0;
  double miou = 0.0;
};

struct SweepSummary {
  std::vector<BestLayer> best;
  std::vector<MetricsRecord> table;

  nlohmann::json to_json() const;
};

/// Best layer by mIoU per (model, size, kind); ties go to the shallowest
/// layer. Records without mIoU are kept in the table but never selected.
SweepSummary sweep_summary(std::span<const MetricsRecord> records);

}  // namespace repprobe
