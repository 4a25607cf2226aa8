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

#include "repprobe/densify.hpp"

#include <algorithm>
#include <cmath>

namespace repprobe {
namespace {

void check_grid(const MatrixF& patches, GridSize grid, GridSize target) {
  if (patches.rows() != grid.cells()) {
    fail(ErrorKind::kShape, "patch matrix has " + std::to_string(patches.rows()) +
                                " rows, grid has " + std::to_string(grid.cells()) + " cells");
  }
  if (target.rows < grid.rows || target.cols < grid.cols) {
    fail(ErrorKind::kUnsupported, "target " + std::to_string(target.rows) + "x" +
                                      std::to_string(target.cols) + " is smaller than grid " +
                                      std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
}

// Calls fn(pixel_index, feature) with each upsampled pixel in float64.
template <typename Fn>
void for_each_pixel(const MatrixF& patches, GridSize grid, GridSize target, Fn&& fn) {
  const auto ty = bilinear_taps(grid.rows, target.rows);
  const auto tx = bilinear_taps(grid.cols, target.cols);
  const std::size_t d = patches.cols();
  std::vector<double> f(d);
  for (std::size_t r = 0; r < target.rows; ++r) {
    const auto& y = ty[r];
    for (std::size_t c = 0; c < target.cols; ++c) {
      const auto& x = tx[c];
      const auto p00 = patches.row(y.lo * grid.cols + x.lo);
      const auto p01 = patches.row(y.lo * grid.cols + x.hi);
      const auto p10 = patches.row(y.hi * grid.cols + x.lo);
      const auto p11 = patches.row(y.hi * grid.cols + x.hi);
      const double w00 = (1.0 - y.frac) * (1.0 - x.frac);
      const double w01 = (1.0 - y.frac) * x.frac;
      const double w10 = y.frac * (1.0 - x.frac);
      const double w11 = y.frac * x.frac;
      for (std::size_t j = 0; j < d; ++j) {
        f[j] = w00 * p00[j] + w01 * p01[j] + w10 * p10[j] + w11 * p11[j];
      }
      fn(r * target.cols + c, std::span<const double>(f));
    }
  }
}

}  // namespace

std::vector<AxisTap> bilinear_taps(std::size_t source, std::size_t target) {
  std::vector<AxisTap> taps(target);
  const double scale = static_cast<double>(source) / static_cast<double>(target);
  const double last = static_cast<double>(source - 1);
  for (std::size_t t = 0; t < target; ++t) {
    const double s = std::clamp((static_cast<double>(t) + 0.5) * scale - 0.5, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(s));
    taps[t].lo = lo;
    taps[t].hi = std::min(lo + 1, source - 1);
    taps[t].frac = s - static_cast<double>(lo);
  }
  return taps;
}

DenseFeatureMap upsample_bilinear(const MatrixF& patches, GridSize grid, GridSize target) {
  check_grid(patches, grid, target);
  DenseFeatureMap out;
  out.height = target.rows;
  out.width = target.cols;
  out.source_grid = grid;
  if (grid == target) {
    out.features = patches;
    return out;
  }
  out.features = MatrixF(target.cells(), patches.cols());
  for_each_pixel(patches, grid, target, [&](std::size_t px, std::span<const double> f) {
    auto dst = out.features.row(px);
    for (std::size_t j = 0; j < f.size(); ++j) dst[j] = static_cast<float>(f[j]);
  });
  return out;
}

LabelMap segment_image(const DenseFeatureMap& dense, const Codebook& codebook) {
  if (dense.dim() != codebook.dim()) {
    fail(ErrorKind::kShape, "dense map has d=" + std::to_string(dense.dim()) +
                                ", codebook has d=" + std::to_string(codebook.dim()));
  }
  if (dense.features.rows() != dense.height * dense.width) {
    fail(ErrorKind::kShape, "dense map storage does not match its size");
  }
  const CentroidIndex index(codebook.centroids);
  LabelMap labels(dense.height, dense.width, 0, kPredictionIgnore);
  for (std::size_t px = 0; px < labels.pixel_count(); ++px) {
    labels.values[px] = index.nearest(dense.features.row(px)).id;
  }
  return labels;
}

LabelMap segment_patches(const MatrixF& patches, GridSize grid, GridSize target,
                         const CentroidIndex& index) {
  check_grid(patches, grid, target);
  if (patches.cols() != index.dim()) fail(ErrorKind::kShape, "patch/codebook dimension mismatch");
  LabelMap labels(target.rows, target.cols, 0, kPredictionIgnore);
  if (grid == target) {
    for (std::size_t px = 0; px < labels.pixel_count(); ++px) {
      labels.values[px] = index.nearest(patches.row(px)).id;
    }
    return labels;
  }
  // Round through float so the labels match segment_image on a stored map.
  std::vector<float> rounded(patches.cols());
  for_each_pixel(patches, grid, target, [&](std::size_t px, std::span<const double> f) {
    for (std::size_t j = 0; j < f.size(); ++j) rounded[j] = static_cast<float>(f[j]);
    labels.values[px] = index.nearest(std::span<const float>(rounded)).id;
  });
  return labels;
}

MatrixF soft_assignments(const MatrixF& patches, GridSize grid, GridSize target,
                         const CentroidIndex& index, double temperature) {
  check_grid(patches, grid, target);
  if (!(temperature > 0.0)) fail(ErrorKind::kInput, "softmax temperature must be > 0");
  const std::size_t k = index.k();
  MatrixF probs(k, target.cells());
  std::vector<double> sims(k);
  std::vector<double> rounded(patches.cols());
  for_each_pixel(patches, grid, target, [&](std::size_t px, std::span<const double> f) {
    for (std::size_t j = 0; j < f.size(); ++j) rounded[j] = static_cast<float>(f[j]);
    index.similarities(rounded, sims);
    const double mx = *std::max_element(sims.begin(), sims.end());
    double z = 0.0;
    for (auto& s : sims) {
      s = std::exp((s - mx) / temperature);
      z += s;
    }
    for (std::size_t c = 0; c < k; ++c) probs(c, px) = static_cast<float>(sims[c] / z);
  });
  return probs;
}

}  // namespace repprobe
