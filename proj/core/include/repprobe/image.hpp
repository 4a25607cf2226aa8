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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "repprobe/matrix.hpp"
#include "repprobe/tensorio.hpp"

namespace repprobe {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major, no alpha.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t w, std::size_t h, Rgb fill = {0, 0, 0});

  Rgb pixel(std::size_t r, std::size_t c) const;
  void set(std::size_t r, std::size_t c, Rgb color);

  /// Copies `src` with its top-left corner at (row, col); clips at the edges.
  void blit(const Image& src, std::size_t row, std::size_t col);

  friend bool operator==(const Image&, const Image&) = default;
};

Image image_from_tensor(const Tensor& tensor);

/// PNG bytes with fixed settings (8-bit RGB, no filter, zlib level 9, no
/// ancillary chunks): identical rasters encode to identical bytes.
std::vector<std::byte> encode_png(const Image& image);
void write_png(const Image& image, const std::filesystem::path& path);

/// Palette colors per label; ignore pixels get `ignore_color`. A label without
/// a palette entry throws kRender naming it.
Image colorize(const LabelMap& labels, const Palette& palette, Rgb ignore_color = {0, 0, 0});

/// 0 -> black, nonzero -> white.
Image binary_image(const Matrix<std::uint8_t>& mask);

/// Values in [0, 1] as grayscale, row-major height x width.
Image grayscale_image(std::span<const double> values, std::size_t height, std::size_t width);

inline constexpr std::size_t kGlyphWidth = 5;
inline constexpr std::size_t kGlyphHeight = 7;
inline constexpr std::size_t kGlyphAdvance = kGlyphWidth + 1;

/// Draws uppercase 5x7 glyphs (lowercase folds to uppercase, unknown
/// characters render as '?'). Returns the x just past the last glyph.
std::size_t draw_text(Image& image, std::size_t row, std::size_t col, std::string_view text, Rgb color);

}  // namespace repprobe
