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

#include "repprobe/locality.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace repprobe {

void check_attention(const AttentionRecord& record) {
  const std::size_t n = record.matrix.rows();
  if (n == 0 || record.matrix.cols() != n) fail(ErrorKind::kShape, "attention must be N x N");
  for (std::size_t q = 0; q < n; ++q) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = record.matrix(q, k);
      if (!(a >= 0.0)) {
        fail(ErrorKind::kData, "attention entry (" + std::to_string(q) + ", " + std::to_string(k) +
                                   ") is negative or NaN");
      }
      sum += a;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      fail(ErrorKind::kData, "attention row " + std::to_string(q) + " sums to " + std::to_string(sum));
    }
  }
}

double attention_mi(const AttentionRecord& record) {
  check_attention(record);
  const std::size_t n = record.matrix.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> key_marginal(n, 0.0);
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t k = 0; k < n; ++k) key_marginal[k] += record.matrix(q, k) * inv_n;
  }
  // P(k,q)/(P(k)P(q)) = (A[q,k]/N) / (P(k)/N) = A[q,k] / P(k)
  double mi = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t k = 0; k < n; ++k) {
      const double a = record.matrix(q, k);
      if (a == 0.0) continue;
      mi += a * inv_n * std::log(a / key_marginal[k]);
    }
  }
  return std::max(mi, 0.0);
}

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) fail(ErrorKind::kInput, "percentile of an empty set");
  if (!(pct > 0.0 && pct < 100.0)) fail(ErrorKind::kInput, "percentile must lie in (0, 100)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Matrix<std::uint8_t> binarize_attention(const AttentionRecord& record, double pct) {
  const double threshold = percentile(record.matrix.values(), pct);
  Matrix<std::uint8_t> out(record.matrix.rows(), record.matrix.cols());
  const auto src = record.matrix.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
  return out;
}

std::vector<LayerProfileEntry> layer_profile(const std::map<int, std::vector<double>>& mi_by_layer,
                                             std::span<const int> expected_layers) {
  std::set<int> layers(expected_layers.begin(), expected_layers.end());
  for (const auto& [layer, values] : mi_by_layer) layers.insert(layer);
  std::vector<LayerProfileEntry> out;
  for (int layer : layers) {
    LayerProfileEntry e;
    e.layer = layer;
    auto it = mi_by_layer.find(layer);
    if (it != mi_by_layer.end() && !it->second.empty()) {
      double sum = 0.0;
      for (double v : it->second) sum += v;
      e.records = it->second.size();
      e.mean_mi = sum / static_cast<double>(e.records);
    }
    out.push_back(e);
  }
  return out;
}

nlohmann::json layer_profile_json(const std::vector<LayerProfileEntry>& profile) {
  nlohmann::json series = nlohmann::json::array();
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& e : profile) {
    series.push_back({{"layer", e.layer},
                      {"mean_mi", e.mean_mi ? nlohmann::json(*e.mean_mi) : nlohmann::json(nullptr)},
                      {"records", e.records}});
    if (!e.mean_mi) gaps.push_back(e.layer);
  }
  return {{"series", series}, {"gaps", gaps}};
}

}  // namespace repprobe
