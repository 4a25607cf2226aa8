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

#include "repprobe/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <png.h>

namespace repprobe {
namespace {

struct Glyph {
  char ch;
  const char* rows;  // 7 rows of 5 cells, '#' set
};

// clang-format off
constexpr Glyph kFont[] = {
  {'A', " ### #   ##   #######   ##   ##   #"},
  {'B', "#### #   ##   ##### #   ##   ##### "},
  {'C', " ### #   ##    #    #    #   # ### "},
  {'D', "#### #   ##   ##   ##   ##   ##### "},
  {'E', "######    #    #### #    #    #####"},
  {'F', "######    #    #### #    #    #    "},
  {'G', " ### #   ##    # ####   ##   # ####"},
  {'H', "#   ##   ##   #######   ##   ##   #"},
  {'I', " ###   #    #    #    #    #   ### "},
  {'J', "  ###   #    #    #    ##  # ##    "},
  {'K', "#   ##  # # #  ##   # #  #  # #   #"},
  {'L', "#    #    #    #    #    #    #####"},
  {'M', "#   ### ### # ##   ##   ##   ##   #"},
  {'N', "#   ###  ## # ##  ###   ##   ##   #"},
  {'O', " ### #   ##   ##   ##   ##   # ### "},
  {'P', "#### #   ##   ##### #    #    #    "},
  {'Q', " ### #   ##   ##   ## # ##  #  ## #"},
  {'R', "#### #   ##   ##### # #  #  # #   #"},
  {'S', " ####    #     ###     #    #####  "},
  {'T', "#####  #    #    #    #    #    #  "},
  {'U', "#   ##   ##   ##   ##   ##   # ### "},
  {'V', "#   ##   ##   ##   ##   # # #   #  "},
  {'W', "#   ##   ##   ## # ## # ## # # # # "},
  {'X', "#   ##   # # #   #   # # #   ##   #"},
  {'Y', "#   ##   # # #   #    #    #    #  "},
  {'Z', "#####    #   #   #   #   #    #####"},
  {'0', " ### #   ##  ### # ###  ##   # ### "},
  {'1', "  #   ##    #    #    #    #   ### "},
  {'2', " ### #   #    #   #   #   #   #####"},
  {'3', "#####   #   #     #     ##   # ### "},
  {'4', "   #   ##  # # #  ######   #    #  "},
  {'5', "######    ####     #    ##   # ### "},
  {'6', "  ##  #   #    #### #   ##   # ### "},
  {'7', "#####    #   #   #   #    #    #   "},
  {'8', " ### #   ##   # ### #   ##   # ### "},
  {'9', " ### #   ##   # ####    #   #  ##  "},
  {' ', "                                   "},
  {'-', "               ###                 "},
  {'_', "                              #####"},
  {'.', "                          ##   ##  "},
  {':', "      ##   ##        ##   ##       "},
  {'/', "    #    #   #   #   #    #        "},
  {'=', "          #####     #####          "},
  {'+', "       #    #  #####  #    #       "},
  {'(', "   #   #   #    #    #     #     # "},
  {')', " #     #     #    #    #   #   #   "},
  {',', "                     ##   ##  #    "},
  {'#', " # #  # # ##### # # ##### # #  # # "},
  {'?', " ### #   #    #   #   #         #  "},
};
// clang-format on

const Glyph& glyph_for(char ch) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& g : kFont) {
    if (g.ch == up) return g;
  }
  return kFont[std::size(kFont) - 1];
}

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::byte>*>(png_get_io_ptr(png));
  const auto* p = reinterpret_cast<const std::byte*>(data);
  out->insert(out->end(), p, p + length);
}

void flush_nothing(png_structp) {}

}  // namespace

Image::Image(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), rgb(w * h * 3) {
  for (std::size_t i = 0; i < w * h; ++i) std::copy(fill.begin(), fill.end(), rgb.begin() + i * 3);
}

Rgb Image::pixel(std::size_t r, std::size_t c) const {
  const std::size_t o = (r * width + c) * 3;
  return {rgb[o], rgb[o + 1], rgb[o + 2]};
}

void Image::set(std::size_t r, std::size_t c, Rgb color) {
  const std::size_t o = (r * width + c) * 3;
  rgb[o] = color[0];
  rgb[o + 1] = color[1];
  rgb[o + 2] = color[2];
}

void Image::blit(const Image& src, std::size_t row, std::size_t col) {
  if (row >= height || col >= width) return;
  const std::size_t h = std::min(src.height, height - row);
  const std::size_t w = std::min(src.width, width - col);
  for (std::size_t r = 0; r < h; ++r) {
    std::memcpy(rgb.data() + ((row + r) * width + col) * 3, src.rgb.data() + r * src.width * 3, w * 3);
  }
}

Image image_from_tensor(const Tensor& tensor) {
  if (tensor.dtype() != DType::kUInt8 || tensor.rank() != 3 || tensor.shape()[2] != 3) {
    fail(ErrorKind::kShape, "RGB image must be a uint8 (H, W, 3) tensor");
  }
  Image img;
  img.height = tensor.shape()[0];
  img.width = tensor.shape()[1];
  const auto v = tensor.values<std::uint8_t>();
  img.rgb.assign(v.begin(), v.end());
  return img;
}

std::vector<std::byte> encode_png(const Image& image) {
  if (image.width == 0 || image.height == 0) fail(ErrorKind::kInput, "cannot encode an empty image");
  std::vector<std::byte> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::kIo, "png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(image.height);
  for (std::size_t r = 0; r < image.height; ++r) {
    rows[r] = const_cast<png_bytep>(image.rgb.data() + r * image.width * 3);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, append_bytes, flush_nothing);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 9);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

Image colorize(const LabelMap& labels, const Palette& palette, Rgb ignore_color) {
  Image img(labels.width, labels.height);
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const auto v = labels.values[i];
    Rgb c = ignore_color;
    if (v != labels.ignore_index) {
      if (v < 0 || static_cast<std::size_t>(v) >= palette.size()) {
        fail(ErrorKind::kRender, "palette has no color for label " + std::to_string(v));
      }
      c = palette.color(static_cast<std::size_t>(v));
    }
    std::copy(c.begin(), c.end(), img.rgb.begin() + i * 3);
  }
  return img;
}

Image binary_image(const Matrix<std::uint8_t>& mask) {
  Image img(mask.cols(), mask.rows());
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) {
      if (mask(r, c)) img.set(r, c, {255, 255, 255});
    }
  }
  return img;
}

Image grayscale_image(std::span<const double> values, std::size_t height, std::size_t width) {
  if (values.size() != height * width) fail(ErrorKind::kShape, "grayscale values do not match size");
  Image img(width, height);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
    std::fill_n(img.rgb.begin() + i * 3, 3, g);
  }
  return img;
}

std::size_t draw_text(Image& image, std::size_t row, std::size_t col, std::string_view text, Rgb color) {
  std::size_t x = col;
  for (char ch : text) {
    const Glyph& g = glyph_for(ch);
    for (std::size_t gy = 0; gy < kGlyphHeight; ++gy) {
      for (std::size_t gx = 0; gx < kGlyphWidth; ++gx) {
        if (g.rows[gy * kGlyphWidth + gx] != '#') continue;
        const std::size_t r = row + gy;
        const std::size_t c = x + gx;
        if (r < image.height && c < image.width) image.set(r, c, color);
      }
    }
    x += kGlyphAdvance;
  }
  return x;
}

}  // namespace repprobe
