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

#include "repprobe/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <Eigen/Core>

namespace repprobe {
namespace {

namespace fs = std::filesystem;

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  auto raw = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T get_le(std::span<const std::byte> bytes, std::size_t offset) {
  std::array<std::byte, sizeof(T)> raw;
  std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

template <typename T>
void put_payload(std::vector<std::byte>& out, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    const auto* p = reinterpret_cast<const std::byte*>(values.data());
    out.insert(out.end(), p, p + values.size_bytes());
  } else {
    for (const T& v : values) put_le(out, v);
  }
}

template <typename T>
std::vector<T> get_payload(std::span<const std::byte> bytes, std::size_t offset, std::uint64_t n) {
  std::vector<T> out(n);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), bytes.data() + offset, n * sizeof(T));
  } else {
    for (std::uint64_t i = 0; i < n; ++i) out[i] = get_le<T>(bytes, offset + i * sizeof(T));
  }
  return out;
}

void check_shape(const std::vector<std::uint64_t>& shape) {
  if (shape.empty() || shape.size() > kMaxTensorRank) {
    fail(ErrorKind::kShape, "tensor rank " + std::to_string(shape.size()) + " outside [1, 4]");
  }
  for (auto extent : shape) {
    if (extent == 0) fail(ErrorKind::kShape, "tensor shape entries must be positive");
  }
}

std::uint64_t product(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::vector<std::byte> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  return bytes;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return 4;
    case DType::kFloat16: return 2;
    case DType::kUInt8: return 1;
    case DType::kInt32: return 4;
  }
  fail(ErrorKind::kVersion, "unknown dtype code " + std::to_string(static_cast<unsigned>(dtype)));
}

std::string_view to_string(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "float32";
    case DType::kFloat16: return "float16";
    case DType::kUInt8: return "uint8";
    case DType::kInt32: return "int32";
  }
  return "unknown";
}

std::uint64_t TensorHeader::element_count() const { return product(shape); }

Tensor::Tensor(std::vector<std::uint64_t> shape, std::vector<float> values)
    : shape_(std::move(shape)), storage_(std::move(values)) {
  check_shape(shape_);
  if (product(shape_) != std::get<0>(storage_).size()) {
    fail(ErrorKind::kShape, "value count does not match tensor shape");
  }
}

Tensor::Tensor(std::vector<std::uint64_t> shape, std::vector<std::uint8_t> values)
    : shape_(std::move(shape)), storage_(std::move(values)) {
  check_shape(shape_);
  if (product(shape_) != std::get<1>(storage_).size()) {
    fail(ErrorKind::kShape, "value count does not match tensor shape");
  }
}

Tensor::Tensor(std::vector<std::uint64_t> shape, std::vector<std::int32_t> values)
    : shape_(std::move(shape)), storage_(std::move(values)) {
  check_shape(shape_);
  if (product(shape_) != std::get<2>(storage_).size()) {
    fail(ErrorKind::kShape, "value count does not match tensor shape");
  }
}

DType Tensor::dtype() const {
  switch (storage_.index()) {
    case 0: return DType::kFloat32;
    case 1: return DType::kUInt8;
    default: return DType::kInt32;
  }
}

std::uint64_t Tensor::element_count() const { return product(shape_); }

MatrixF Tensor::to_matrix() const {
  if (rank() != 2) fail(ErrorKind::kShape, "expected a rank-2 tensor");
  auto v = values<float>();
  return MatrixF(shape_[0], shape_[1], std::vector<float>(v.begin(), v.end()));
}

Tensor matrix_tensor(const MatrixF& matrix) {
  return Tensor({matrix.rows(), matrix.cols()}, matrix.storage());
}

TensorHeader parse_tensor_header(std::span<const std::byte> bytes) {
  if (bytes.size() < 12 ||
      std::memcmp(bytes.data(), kTensorMagic.data(), kTensorMagic.size()) != 0) {
    fail(ErrorKind::kFormat, "missing RPT1 magic");
  }
  TensorHeader header;
  const auto code = get_le<std::uint32_t>(bytes, 4);
  if (code < 1 || code > 4) {
    fail(ErrorKind::kVersion, "unknown dtype code " + std::to_string(code));
  }
  header.dtype = static_cast<DType>(code);
  const auto ndim = get_le<std::uint32_t>(bytes, 8);
  if (ndim < 1 || ndim > kMaxTensorRank) {
    fail(ErrorKind::kFormat, "rank " + std::to_string(ndim) + " outside [1, 4]");
  }
  if (bytes.size() < 12 + 8 * std::size_t{ndim}) {
    fail(ErrorKind::kCorruption, "header truncated");
  }
  header.shape.resize(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    header.shape[i] = get_le<std::uint64_t>(bytes, 12 + 8 * i);
    if (header.shape[i] == 0) fail(ErrorKind::kFormat, "zero extent in tensor shape");
  }
  return header;
}

Tensor parse_tensor(std::span<const std::byte> bytes) {
  const TensorHeader header = parse_tensor_header(bytes);
  const std::size_t offset = header.header_bytes();
  const std::uint64_t expected = header.payload_bytes();
  if (bytes.size() - offset < expected) {
    fail(ErrorKind::kCorruption, "payload truncated: expected " + std::to_string(expected) +
                                     " bytes, found " + std::to_string(bytes.size() - offset));
  }
  if (bytes.size() - offset > expected) {
    fail(ErrorKind::kCorruption, "trailing bytes after payload");
  }
  const std::uint64_t n = header.element_count();
  switch (header.dtype) {
    case DType::kFloat32:
      return Tensor(header.shape, get_payload<float>(bytes, offset, n));
    case DType::kFloat16: {
      auto raw = get_payload<std::uint16_t>(bytes, offset, n);
      std::vector<float> widened(n);
      std::transform(raw.begin(), raw.end(), widened.begin(), [](std::uint16_t bits) {
        return static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits));
      });
      Tensor t(header.shape, std::move(widened));
      t.set_disk_dtype(DType::kFloat16);
      return t;
    }
    case DType::kUInt8:
      return Tensor(header.shape, get_payload<std::uint8_t>(bytes, offset, n));
    case DType::kInt32:
      return Tensor(header.shape, get_payload<std::int32_t>(bytes, offset, n));
  }
  fail(ErrorKind::kVersion, "unknown dtype");
}

std::vector<std::byte> serialize_tensor(const Tensor& tensor, std::optional<DType> disk_dtype) {
  check_shape(tensor.shape());
  const DType target = disk_dtype.value_or(tensor.dtype());
  if (target != tensor.dtype() &&
      !(target == DType::kFloat16 && tensor.dtype() == DType::kFloat32)) {
    fail(ErrorKind::kUnsupported, "cannot store " + std::string(to_string(tensor.dtype())) +
                                      " as " + std::string(to_string(target)));
  }
  std::vector<std::byte> out;
  out.reserve(12 + 8 * tensor.rank() + tensor.element_count() * dtype_size(target));
  out.insert(out.end(), reinterpret_cast<const std::byte*>(kTensorMagic.data()),
             reinterpret_cast<const std::byte*>(kTensorMagic.data()) + kTensorMagic.size());
  put_le(out, static_cast<std::uint32_t>(target));
  put_le(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto extent : tensor.shape()) put_le(out, extent);

  switch (target) {
    case DType::kFloat32: put_payload(out, tensor.values<float>()); break;
    case DType::kFloat16: {
      std::vector<std::uint16_t> narrow;
      narrow.reserve(tensor.element_count());
      for (float v : tensor.values<float>()) {
        narrow.push_back(Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(v)));
      }
      put_payload(out, std::span<const std::uint16_t>(narrow));
      break;
    }
    case DType::kUInt8: put_payload(out, tensor.values<std::uint8_t>()); break;
    case DType::kInt32: put_payload(out, tensor.values<std::int32_t>()); break;
  }
  return out;
}

TensorHeader read_tensor_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::array<std::byte, 12 + 8 * kMaxTensorRank> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  const TensorHeader header = parse_tensor_header(std::span<const std::byte>(head.data(), got));
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot stat " + path.string());
  if (size != header.header_bytes() + header.payload_bytes()) {
    fail(ErrorKind::kCorruption, path.string() + ": file holds " + std::to_string(size) +
                                     " bytes, header implies " +
                                     std::to_string(header.header_bytes() + header.payload_bytes()));
  }
  return header;
}

Tensor read_tensor(const fs::path& path) {
  const auto bytes = slurp(path);
  try {
    return parse_tensor(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

fs::path write_tensor(const Tensor& tensor, const fs::path& path, std::optional<DType> disk_dtype) {
  const auto bytes = serialize_tensor(tensor, disk_dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
  return path;
}

LabelMap label_map_from_tensor(const Tensor& tensor, std::int32_t ignore_index) {
  if (tensor.rank() != 2) fail(ErrorKind::kShape, "label map must be rank 2 (H, W)");
  LabelMap labels;
  labels.height = tensor.shape()[0];
  labels.width = tensor.shape()[1];
  labels.ignore_index = ignore_index;
  switch (tensor.dtype()) {
    case DType::kUInt8: {
      auto v = tensor.values<std::uint8_t>();
      labels.values.assign(v.begin(), v.end());
      break;
    }
    case DType::kInt32: {
      auto v = tensor.values<std::int32_t>();
      labels.values.assign(v.begin(), v.end());
      break;
    }
    default:
      fail(ErrorKind::kData, "label map must be uint8 or int32, got " +
                                 std::string(to_string(tensor.dtype())));
  }
  return labels;
}

Tensor label_map_tensor(const LabelMap& labels) {
  const bool fits = std::all_of(labels.values.begin(), labels.values.end(),
                                [](std::int32_t v) { return v >= 0 && v <= 255; });
  if (fits) {
    return Tensor({labels.height, labels.width},
                  std::vector<std::uint8_t>(labels.values.begin(), labels.values.end()));
  }
  return Tensor({labels.height, labels.width}, labels.values);
}

void check_label_range(const LabelMap& labels, std::size_t class_count) {
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const auto v = labels.values[i];
    if (v == labels.ignore_index) continue;
    if (v < 0 || static_cast<std::size_t>(v) >= class_count) {
      fail(ErrorKind::kData, "label " + std::to_string(v) + " at pixel (" +
                                 std::to_string(i / labels.width) + ", " +
                                 std::to_string(i % labels.width) + ") outside [0, " +
                                 std::to_string(class_count) + ")");
    }
  }
}

Palette palette_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::kFormat, "palette must be a JSON object");
  Palette palette;
  palette.entries.resize(doc.size());
  std::vector<bool> seen(doc.size(), false);
  for (const auto& [key, value] : doc.items()) {
    std::size_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoul(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, "palette key '" + key + "' is not a class id");
    }
    if (id >= palette.entries.size() || seen[id]) {
      fail(ErrorKind::kFormat, "palette ids must cover [0, " +
                                   std::to_string(palette.entries.size()) + ") exactly once");
    }
    seen[id] = true;
    const auto& rgb = value.at("rgb");
    if (!rgb.is_array() || rgb.size() != 3) {
      fail(ErrorKind::kFormat, "palette entry " + key + " needs rgb [r, g, b]");
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const int channel = rgb[c].get<int>();
      if (channel < 0 || channel > 255) {
        fail(ErrorKind::kFormat, "palette entry " + key + " has channel outside [0, 255]");
      }
      palette.entries[id].rgb[c] = static_cast<std::uint8_t>(channel);
    }
    palette.entries[id].name = value.value("name", std::string{});
  }
  return palette;
}

nlohmann::json palette_to_json(const Palette& palette) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t id = 0; id < palette.entries.size(); ++id) {
    const auto& e = palette.entries[id];
    doc[std::to_string(id)] = {{"name", e.name}, {"rgb", {e.rgb[0], e.rgb[1], e.rgb[2]}}};
  }
  return doc;
}

Palette read_palette(const fs::path& path) {
  try {
    return palette_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

void write_palette(const Palette& palette, const fs::path& path) {
  write_json(palette_to_json(palette), path);
}

Palette default_palette(std::size_t count) {
  Palette palette;
  palette.entries.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Golden-angle hue walk, full saturation, two alternating brightness levels.
    const double hue = std::fmod(static_cast<double>(i) * 137.50776405, 360.0) / 60.0;
    const double value = (i % 2 == 0) ? 1.0 : 0.7;
    const double x = value * (1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hue)) {
      case 0: r = value; g = x; break;
      case 1: r = x; g = value; break;
      case 2: g = value; b = x; break;
      case 3: g = x; b = value; break;
      case 4: r = x; b = value; break;
      default: r = value; b = x; break;
    }
    palette.entries[i].name = "class_" + std::to_string(i);
    palette.entries[i].rgb = {static_cast<std::uint8_t>(std::lround(r * 255)),
                              static_cast<std::uint8_t>(std::lround(g * 255)),
                              static_cast<std::uint8_t>(std::lround(b * 255))};
  }
  return palette;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& doc, const fs::path& path) {
  write_text(doc.dump(2) + "\n", path);
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace repprobe
