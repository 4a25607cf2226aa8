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

#include "repprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace repprobe {
namespace {

std::string csv_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v).dump() : std::string{};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  return doc[key].get<double>();
}

std::optional<double> pearson_of(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------

Image AggregateMap::to_image() const {
  Image img(width, height);
  for (std::size_t i = 0; i < blend.size(); ++i) {
    img.rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(blend[i], 0.0, 255.0)));
  }
  return img;
}

AggregateAccumulator::AggregateAccumulator(std::size_t classes, std::size_t height, std::size_t width)
    : classes_(classes), height_(height), width_(width), sums_(classes * height * width, 0.0) {
  if (classes == 0 || height == 0 || width == 0) fail(ErrorKind::kInput, "empty aggregate shape");
}

void AggregateAccumulator::add_hard(const LabelMap& labels) {
  if (labels.height != height_ || labels.width != width_) {
    fail(ErrorKind::kShape, "label map size differs from the aggregate");
  }
  const std::size_t plane = height_ * width_;
  for (std::size_t px = 0; px < plane; ++px) {
    const auto v = labels.values[px];
    if (v == labels.ignore_index) continue;
    if (v < 0 || static_cast<std::size_t>(v) >= classes_) {
      fail(ErrorKind::kRender, "palette has no color for label " + std::to_string(v));
    }
    sums_[static_cast<std::size_t>(v) * plane + px] += 1.0;
  }
  ++images_;
}

void AggregateAccumulator::add_soft(const MatrixF& probabilities) {
  const std::size_t plane = height_ * width_;
  if (probabilities.rows() != classes_ || probabilities.cols() != plane) {
    fail(ErrorKind::kShape, "soft assignments must be classes x (H*W)");
  }
  for (std::size_t k = 0; k < classes_; ++k) {
    const auto row = probabilities.row(k);
    for (std::size_t px = 0; px < plane; ++px) sums_[k * plane + px] += row[px];
  }
  ++images_;
}

AggregateAccumulator& AggregateAccumulator::operator+=(const AggregateAccumulator& other) {
  if (other.classes_ != classes_ || other.height_ != height_ || other.width_ != width_) {
    fail(ErrorKind::kShape, "cannot merge aggregates of different shape");
  }
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
  images_ += other.images_;
  return *this;
}

AggregateAccumulator AggregateAccumulator::remap(const std::vector<std::int32_t>& mapping,
                                                std::size_t classes) const {
  if (mapping.size() != classes_) fail(ErrorKind::kShape, "mapping must cover every cluster");
  AggregateAccumulator out(classes, height_, width_);
  const std::size_t plane = height_ * width_;
  for (std::size_t k = 0; k < classes_; ++k) {
    const auto c = mapping[k];
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      fail(ErrorKind::kData, "cluster " + std::to_string(k) + " maps outside the class range");
    }
    for (std::size_t px = 0; px < plane; ++px) {
      out.sums_[static_cast<std::size_t>(c) * plane + px] += sums_[k * plane + px];
    }
  }
  out.images_ = images_;
  return out;
}

AggregateMap AggregateAccumulator::finalize(const Palette& palette) const {
  if (images_ == 0) fail(ErrorKind::kInput, "aggregate over an empty set");
  if (palette.size() < classes_) {
    fail(ErrorKind::kRender, "palette has no color for label " + std::to_string(palette.size()));
  }
  AggregateMap out;
  out.classes = classes_;
  out.height = height_;
  out.width = width_;
  out.weights.assign(sums_.size(), 0.0);
  out.blend.assign(height_ * width_ * 3, 0.0);
  const std::size_t plane = height_ * width_;
  for (std::size_t px = 0; px < plane; ++px) {
    // Averaging over the image count cancels in the normalization.
    double total = 0.0;
    for (std::size_t k = 0; k < classes_; ++k) total += sums_[k * plane + px];
    if (total <= 0.0) continue;
    for (std::size_t k = 0; k < classes_; ++k) {
      const double w = sums_[k * plane + px] / total;
      out.weights[k * plane + px] = w;
      if (w == 0.0) continue;
      const auto& rgb = palette.color(k);
      for (std::size_t ch = 0; ch < 3; ++ch) out.blend[px * 3 + ch] += w * rgb[ch];
    }
  }
  return out;
}

AggregateMap aggregate_map(std::span<const LabelMap> maps, const Palette& palette) {
  if (maps.empty()) fail(ErrorKind::kInput, "aggregate over an empty set");
  AggregateAccumulator acc(palette.size(), maps.front().height, maps.front().width);
  for (const auto& m : maps) acc.add_hard(m);
  return acc.finalize(palette);
}

// ---------------------------------------------------------------------------

GridSize panel_tile_size(std::size_t tile_height, std::size_t tile_width, const PanelLayout& layout) {
  return {tile_height + (layout.captions ? kCaptionStripHeight : 0), tile_width};
}

Image render_panel(std::span<const PanelCell> cells, const Palette& palette, const PanelLayout& layout,
                   std::span<const std::string> captions) {
  if (cells.empty()) fail(ErrorKind::kInput, "panel has no cells");
  if (layout.rows == 0 || layout.cols == 0) fail(ErrorKind::kInput, "panel layout must be >= 1x1");
  if (cells.size() > layout.rows * layout.cols) {
    fail(ErrorKind::kInput, std::to_string(cells.size()) + " cells do not fit a " +
                                std::to_string(layout.rows) + "x" + std::to_string(layout.cols) + " layout");
  }
  std::vector<Image> tiles;
  tiles.reserve(cells.size());
  for (const auto& cell : cells) {
    if (const auto* labels = std::get_if<LabelMap>(&cell)) {
      tiles.push_back(colorize(*labels, palette));
    } else {
      tiles.push_back(std::get<Image>(cell));
    }
  }
  const std::size_t th = tiles.front().height;
  const std::size_t tw = tiles.front().width;
  for (const auto& t : tiles) {
    if (t.height != th || t.width != tw) fail(ErrorKind::kShape, "panel cells differ in size");
  }
  const GridSize cell = panel_tile_size(th, tw, layout);
  Image montage(cell.cols * layout.cols, cell.rows * layout.rows);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const std::size_t row = (i / layout.cols) * cell.rows;
    const std::size_t col = (i % layout.cols) * cell.cols;
    montage.blit(tiles[i], row, col);
    if (layout.captions) {
      Image strip(tw, kCaptionStripHeight, {32, 32, 32});
      if (i < captions.size()) {
        const std::size_t fit = tw / kGlyphAdvance;
        draw_text(strip, 1, 1, std::string_view(captions[i]).substr(0, fit), {255, 255, 255});
      }
      montage.blit(strip, row + th, col);
    }
  }
  return montage;
}

// ---------------------------------------------------------------------------

nlohmann::json Correlation::to_json() const {
  return {{"pearson", optional_json(pearson)},
          {"spearman", optional_json(spearman)},
          {"n", n},
          {"log_x", log_x},
          {"undefined", !pearson.has_value() || !spearman.has_value()}};
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

Correlation correlate(std::span<const double> x, std::span<const double> y, bool log_x) {
  if (x.size() != y.size()) fail(ErrorKind::kInput, "correlation series differ in length");
  if (x.size() < 3) fail(ErrorKind::kInput, "correlation needs at least 3 points");
  std::vector<double> xs(x.begin(), x.end());
  if (log_x) {
    for (double& v : xs) {
      if (!(v > 0.0)) fail(ErrorKind::kData, "log-scaled series must be positive");
      v = std::log(v);
    }
  }
  Correlation out;
  out.n = x.size();
  out.log_x = log_x;
  out.pearson = pearson_of(xs, y);
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(y);
  out.spearman = pearson_of(rx, ry);
  return out;
}

// ---------------------------------------------------------------------------

void MetricsRecord::validate() const {
  auto in_unit = [](const std::optional<double>& v) { return !v || (*v >= 0.0 && *v <= 1.0); };
  if (!in_unit(miou)) fail(ErrorKind::kData, "mIoU outside [0, 1]");
  if (!in_unit(nmi)) fail(ErrorKind::kData, "NMI outside [0, 1]");
  if (!in_unit(pck)) fail(ErrorKind::kData, "PCK outside [0, 1]");
  if (ikq && *ikq < 0.0) fail(ErrorKind::kData, "I(K,Q) is negative");
}

nlohmann::json MetricsRecord::to_json() const {
  return {{"model", model},
          {"size", size},
          {"kind", kind},
          {"layer", layer},
          {"miou", optional_json(miou)},
          {"nmi", optional_json(nmi)},
          {"ikq", optional_json(ikq)},
          {"pck", optional_json(pck)},
          {"provenance", provenance}};
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& doc) {
  MetricsRecord r;
  try {
    r.model = doc.at("model").get<std::string>();
    r.size = doc.value("size", std::string{});
    r.kind = doc.at("kind").get<std::string>();
    r.layer = doc.at("layer").get<int>();
    r.miou = optional_from(doc, "miou");
    r.nmi = optional_from(doc, "nmi");
    r.ikq = optional_from(doc, "ikq");
    r.pck = optional_from(doc, "pck");
    r.provenance = doc.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("metrics record: ") + e.what());
  }
  return r;
}

std::string metrics_csv(std::span<const MetricsRecord> records) {
  std::ostringstream out;
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : records) {
    out << csv_field(r.model) << ',' << csv_field(r.size) << ',' << csv_field(r.kind) << ',' << r.layer
        << ',' << csv_number(r.miou) << ',' << csv_number(r.nmi) << ',' << csv_number(r.ikq) << ','
        << csv_number(r.pck) << '\n';
  }
  return out.str();
}

nlohmann::json SweepSummary::to_json() const {
  nlohmann::json best_json = nlohmann::json::array();
  for (const auto& b : best) {
    best_json.push_back({{"model", b.model},
                         {"size", b.size},
                         {"kind", b.kind},
                         {"layer", b.layer},
                         {"miou", b.miou}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table) rows.push_back(r.to_json());
  return {{"best_layers", best_json}, {"table", rows}};
}

SweepSummary sweep_summary(std::span<const MetricsRecord> records) {
  SweepSummary out;
  out.table.assign(records.begin(), records.end());
  std::map<std::tuple<std::string, std::string, std::string>, BestLayer> best;
  for (const auto& r : records) {
    if (!r.miou) continue;
    const auto key = std::make_tuple(r.model, r.size, r.kind);
    auto it = best.find(key);
    const bool better = it == best.end() || *r.miou > it->second.miou ||
                        (*r.miou == it->second.miou && r.layer < it->second.layer);
    if (better) best[key] = BestLayer{r.model, r.size, r.kind, r.layer, *r.miou};
  }
  for (auto& [key, b] : best) out.best.push_back(b);
  return out;
}

}  // namespace repprobe
