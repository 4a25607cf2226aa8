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

#include "repprobe/codebook.hpp"
#include "repprobe/manifest.hpp"
#include "repprobe/matrix.hpp"
#include "repprobe/tensorio.hpp"

namespace repprobe {

/// Predicted maps never contain ignore pixels; their ignore index is a value
/// no cluster can take.
inline constexpr std::int32_t kPredictionIgnore = -1;

/// H x W x d features, stored as an (H*W) x d matrix in row-major pixel order.
struct DenseFeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  GridSize source_grid;
  MatrixF features;

  std::size_t dim() const { return features.cols(); }
  std::span<const float> at(std::size_t r, std::size_t c) const { return features.row(r * width + c); }
};

/// One axis of half-pixel-center bilinear resampling: target index t samples
/// source coordinate (t + 0.5) * src / dst - 0.5, clamped to [0, src - 1].
struct AxisTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;  // weight of `hi`
};
std::vector<AxisTap> bilinear_taps(std::size_t source, std::size_t target);

/// Upsamples an (H_p*W_p) x d patch matrix to H x W. Equal sizes copy
/// exactly; a target smaller than the grid throws kUnsupported.
DenseFeatureMap upsample_bilinear(const MatrixF& patches, GridSize grid, GridSize target);

/// Per-pixel nearest-centroid labels (assign tie rule, no ignore pixels).
LabelMap segment_image(const DenseFeatureMap& dense, const Codebook& codebook);

/// upsample_bilinear followed by segment_image, without materializing the
/// dense map. Produces the same labels.
LabelMap segment_patches(const MatrixF& patches, GridSize grid, GridSize target,
                         const CentroidIndex& index);

/// Per-pixel softmax over cosine similarities / temperature, k x (H*W).
MatrixF soft_assignments(const MatrixF& patches, GridSize grid, GridSize target,
                         const CentroidIndex& index, double temperature);

}  // namespace repprobe
