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
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/matrix.hpp"

namespace repprobe {

// On-disk layout of a tensor file (all integers little-endian):
//
//   offset 0   4 bytes   magic "RPT1"
//   offset 4   uint32    dtype code
//   offset 8   uint32    ndim, 1..4
//   offset 12  uint64[]  shape, ndim entries, each > 0
//   ...        payload   row-major values, product(shape) * sizeof(dtype)
//
// Nothing may follow the payload.
enum class DType : std::uint32_t {
  kFloat32 = 1,
  kFloat16 = 2,
  kUInt8 = 3,
  kInt32 = 4,
};

inline constexpr std::array<char, 4> kTensorMagic = {'R', 'P', 'T', '1'};
inline constexpr std::size_t kMaxTensorRank = 4;

std::size_t dtype_size(DType dtype);
std::string_view to_string(DType dtype);

struct TensorHeader {
  DType dtype = DType::kFloat32;
  std::vector<std::uint64_t> shape;

  std::uint64_t element_count() const;
  std::size_t header_bytes() const { return 12 + 8 * shape.size(); }
  std::uint64_t payload_bytes() const { return element_count() * dtype_size(dtype); }
};

/// In-memory tensor. float16 data is widened to float32 on load; `disk_dtype`
/// remembers what the file held.
class Tensor {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<std::uint8_t>,
                               std::vector<std::int32_t>>;

  Tensor() = default;
  Tensor(std::vector<std::uint64_t> shape, std::vector<float> values);
  Tensor(std::vector<std::uint64_t> shape, std::vector<std::uint8_t> values);
  Tensor(std::vector<std::uint64_t> shape, std::vector<std::int32_t> values);

  DType dtype() const;
  DType disk_dtype() const { return disk_dtype_.value_or(dtype()); }
  void set_disk_dtype(DType dtype) { disk_dtype_ = dtype; }

  const std::vector<std::uint64_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::uint64_t element_count() const;

  template <typename T>
  std::span<const T> values() const {
    const auto* v = std::get_if<std::vector<T>>(&storage_);
    if (v == nullptr) {
      fail(ErrorKind::kData, std::string("tensor holds ") + std::string(to_string(dtype())));
    }
    return *v;
  }

  const Storage& storage() const { return storage_; }

  /// Views a rank-2 float tensor as a matrix.
  MatrixF to_matrix() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.storage_ == b.storage_;
  }

 private:
  std::vector<std::uint64_t> shape_;
  Storage storage_;
  std::optional<DType> disk_dtype_;
};

Tensor matrix_tensor(const MatrixF& matrix);

TensorHeader parse_tensor_header(std::span<const std::byte> bytes);
Tensor parse_tensor(std::span<const std::byte> bytes);
std::vector<std::byte> serialize_tensor(const Tensor& tensor,
                                        std::optional<DType> disk_dtype = std::nullopt);

/// Reads only the header and checks the file length against it.
TensorHeader read_tensor_header(const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

/// Writes `tensor`, optionally narrowing float32 to float16 on disk.
std::filesystem::path write_tensor(const Tensor& tensor, const std::filesystem::path& path,
                                   std::optional<DType> disk_dtype = std::nullopt);

// ---------------------------------------------------------------------------
// Label maps

inline constexpr std::int32_t kDefaultIgnoreIndex = 255;

struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> values;
  std::int32_t ignore_index = kDefaultIgnoreIndex;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0,
           std::int32_t ignore = kDefaultIgnoreIndex)
      : height(h), width(w), values(h * w, fill), ignore_index(ignore) {}

  std::int32_t& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  std::int32_t at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  std::size_t pixel_count() const { return values.size(); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

LabelMap label_map_from_tensor(const Tensor& tensor,
                               std::int32_t ignore_index = kDefaultIgnoreIndex);

/// uint8 when every value (including the ignore index) fits, int32 otherwise.
Tensor label_map_tensor(const LabelMap& labels);

/// Throws kData naming the first pixel outside [0, class_count) ∪ {ignore}.
void check_label_range(const LabelMap& labels, std::size_t class_count);

// ---------------------------------------------------------------------------
// Palettes: JSON object {"<id>": {"name": "...", "rgb": [r, g, b]}, ...}

struct PaletteEntry {
  std::string name;
  std::array<std::uint8_t, 3> rgb{};
};

struct Palette {
  std::vector<PaletteEntry> entries;

  std::size_t size() const { return entries.size(); }
  const std::array<std::uint8_t, 3>& color(std::size_t id) const { return entries.at(id).rgb; }
};

Palette palette_from_json(const nlohmann::json& doc);
nlohmann::json palette_to_json(const Palette& palette);
Palette read_palette(const std::filesystem::path& path);
void write_palette(const Palette& palette, const std::filesystem::path& path);

/// Deterministic, well-spread colors for `count` classes.
Palette default_palette(std::size_t count);

// ---------------------------------------------------------------------------

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace repprobe
