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

#include <cstring>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "repprobe/image.hpp"
#include "synthetic.hpp"

namespace repprobe {
namespace {

std::uint32_t be32(const std::vector<std::byte>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | std::to_integer<std::uint32_t>(b[at + i]);
  return v;
}

TEST(Png, SignatureAndHeader) {
  Image img(13, 5, {10, 20, 30});
  const auto bytes = encode_png(img);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  ASSERT_GT(bytes.size(), 33u);
  EXPECT_EQ(std::memcmp(bytes.data(), sig, 8), 0);
  EXPECT_EQ(std::memcmp(bytes.data() + 12, "IHDR", 4), 0);
  EXPECT_EQ(be32(bytes, 16), 13u);
  EXPECT_EQ(be32(bytes, 20), 5u);
  EXPECT_EQ(std::to_integer<int>(bytes[24]), 8);  // bit depth
  EXPECT_EQ(std::to_integer<int>(bytes[25]), 2);  // truecolor
}

TEST(Png, IdenticalRastersGiveIdenticalBytes) {
  Image a(7, 9), b(7, 9);
  for (std::size_t i = 0; i < a.rgb.size(); ++i) a.rgb[i] = b.rgb[i] = static_cast<std::uint8_t>(i * 37);
  EXPECT_EQ(encode_png(a), encode_png(b));
  b.set(3, 3, {1, 2, 3});
  EXPECT_NE(encode_png(a), encode_png(b));

  testing::TempDir dir;
  write_png(a, dir / "a.png");
  std::ifstream in(dir / "a.png", std::ios::binary);
  const std::vector<char> file{std::istreambuf_iterator<char>(in), {}};
  const auto mem = encode_png(a);
  ASSERT_EQ(file.size(), mem.size());
  EXPECT_EQ(std::memcmp(file.data(), mem.data(), mem.size()), 0);
  EXPECT_ERROR_KIND(encode_png(Image()), ErrorKind::kInput);
}

TEST(Colorize, PaletteLookupAndIgnore) {
  Palette p;
  p.entries = {{"a", {1, 2, 3}}, {"b", {4, 5, 6}}};
  LabelMap m(1, 3);
  m.values = {0, 1, 255};
  const Image img = colorize(m, p, {9, 9, 9});
  EXPECT_EQ(img.pixel(0, 0), (Rgb{1, 2, 3}));
  EXPECT_EQ(img.pixel(0, 1), (Rgb{4, 5, 6}));
  EXPECT_EQ(img.pixel(0, 2), (Rgb{9, 9, 9}));
  m.values[1] = 2;
  EXPECT_ERROR_KIND(colorize(m, p), ErrorKind::kRender);
}

TEST(Binary, ZeroBlackNonzeroWhite) {
  Matrix<std::uint8_t> mask(2, 2, 0);
  mask(0, 1) = 1;
  mask(1, 0) = 7;
  const Image img = binary_image(mask);
  EXPECT_EQ(img.pixel(0, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(img.pixel(0, 1), (Rgb{255, 255, 255}));
  EXPECT_EQ(img.pixel(1, 0), (Rgb{255, 255, 255}));
}

TEST(Grayscale, EndpointsAndShape) {
  const std::vector<double> v = {0.0, 1.0, 0.5, 1.0, 0.0, 0.25};
  const Image img = grayscale_image(v, 2, 3);
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.pixel(0, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(img.pixel(0, 1), (Rgb{255, 255, 255}));
  EXPECT_EQ(img.pixel(0, 2)[0], img.pixel(0, 2)[1]);
}

TEST(Text, AdvanceAndInk) {
  Image img(40, 10);
  const std::size_t end = draw_text(img, 1, 2, "ab?", {255, 255, 255});
  EXPECT_EQ(end, 2 + 3 * kGlyphAdvance);
  std::size_t lit = 0;
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      if (img.pixel(r, c)[0] == 0) continue;
      ++lit;
      EXPECT_GE(r, 1u);
      EXPECT_LT(r, 1 + kGlyphHeight);
      EXPECT_LT(c, end);
    }
  }
  EXPECT_GT(lit, 0u);

  Image lower(40, 10), upper(40, 10);
  draw_text(lower, 0, 0, "xyz", {255, 0, 0});
  draw_text(upper, 0, 0, "XYZ", {255, 0, 0});
  EXPECT_EQ(lower, upper);
}

TEST(Blit, CopiesAndClips) {
  Image dst(4, 4);
  const Image src(3, 3, {5, 6, 7});
  dst.blit(src, 2, 2);
  EXPECT_EQ(dst.pixel(2, 2), (Rgb{5, 6, 7}));
  EXPECT_EQ(dst.pixel(3, 3), (Rgb{5, 6, 7}));
  EXPECT_EQ(dst.pixel(1, 1), (Rgb{0, 0, 0}));
}

TEST(FromTensor, Uint8RgbOnly) {
  const Tensor t({2, 1, 3}, std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
  const Image img = image_from_tensor(t);
  EXPECT_EQ(img.pixel(1, 0), (Rgb{4, 5, 6}));
  EXPECT_ERROR_KIND(image_from_tensor(Tensor({2, 3}, std::vector<std::uint8_t>(6))), ErrorKind::kShape);
  EXPECT_ERROR_KIND(image_from_tensor(Tensor({1, 1, 3}, std::vector<float>(3))), ErrorKind::kShape);
}

}  // namespace
}  // namespace repprobe
