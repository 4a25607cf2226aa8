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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/matrix.hpp"

namespace repprobe {

/// Head-averaged, post-softmax patch attention: rows are queries, columns
/// keys, each row a distribution over keys.
struct AttentionRecord {
  int layer = 1;
  std::string image_id;
  MatrixD matrix;

  std::size_t tokens() const { return matrix.rows(); }
};

inline constexpr double kRowSumTolerance = 1e-4;

/// Throws kData naming the first negative entry or row whose sum is off by
/// more than kRowSumTolerance.
void check_attention(const AttentionRecord& record);

/// I(K,Q) in nats with P(k,q) = A[q,k]/N and a uniform query marginal.
double attention_mi(const AttentionRecord& record);

/// Empirical percentile over all entries, linear interpolation between order
/// statistics at rank p/100 * (n - 1).
double percentile(std::span<const double> values, double pct);

/// 1 where an entry lies strictly above the `pct` percentile of all entries.
Matrix<std::uint8_t> binarize_attention(const AttentionRecord& record, double pct = 95.0);

struct LayerProfileEntry {
  int layer = 0;
  std::optional<double> mean_mi;  // empty marks a gap
  std::size_t records = 0;
};

/// Mean I(K,Q) per layer in ascending layer order. Layers listed in
/// `expected_layers` without records appear as gaps.
std::vector<LayerProfileEntry> layer_profile(const std::map<int, std::vector<double>>& mi_by_layer,
                                             std::span<const int> expected_layers = {});

nlohmann::json layer_profile_json(const std::vector<LayerProfileEntry>& profile);

}  // namespace repprobe
