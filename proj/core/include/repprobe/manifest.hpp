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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/matrix.hpp"
#include "repprobe/tensorio.hpp"

namespace repprobe {

enum class EmbeddingKind { kKey, kQuery, kValue, kToken };
enum class LnMode { kPre, kPost, kNotApplicable };

std::string to_string(EmbeddingKind kind);
std::string to_string(LnMode mode);
EmbeddingKind parse_embedding_kind(const std::string& text);
LnMode parse_ln_mode(const std::string& text);

struct GridSize {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t cells() const { return rows * cols; }
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

struct ImageEntry {
  std::string id;
  std::string embedding;                 // (H_p*W_p, d) float32/float16
  std::string labels;                    // (H, W) uint8/int32
  std::optional<std::string> attention;  // (N, N) float32, N = H_p*W_p
  std::optional<std::string> image;      // (H, W, 3) uint8, for panels only
};

/// One (model, layer, embedding kind) dump of a dataset. File references are
/// relative to `root` unless absolute.
struct DatasetManifest {
  std::string model_id;
  std::string size_tag;
  EmbeddingKind embedding_kind = EmbeddingKind::kToken;
  int layer = 1;
  GridSize patch_grid;
  std::size_t embed_dim = 0;
  GridSize image_size;
  std::size_t image_count = 0;
  LnMode ln_mode = LnMode::kNotApplicable;
  std::string palette;
  std::size_t class_count = 0;
  std::int32_t ignore_index = kDefaultIgnoreIndex;
  std::optional<std::string> keypoints;
  std::vector<ImageEntry> images;

  std::filesystem::path root;

  std::filesystem::path resolve(const std::string& ref) const;
  std::size_t patch_count() const { return patch_grid.cells(); }
  bool has_attention() const;
};

DatasetManifest manifest_from_json(const nlohmann::json& doc, std::filesystem::path root);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

enum class ViolationKind { kSchema, kExistence, kShape, kFormat, kValue };
std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string path;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  nlohmann::json to_json() const;
};

/// Checks every referenced file for existence, header shape and dtype, label
/// value range, and palette coverage. Violations are collected, never thrown.
ValidationReport validate_manifest(const DatasetManifest& manifest,
                                   const std::filesystem::path& root);
inline ValidationReport validate_manifest(const DatasetManifest& manifest) {
  return validate_manifest(manifest, manifest.root);
}

// Loaders that enforce the manifest's declared shapes (kShape on mismatch).
MatrixF load_embeddings(const DatasetManifest& manifest, std::size_t index);
LabelMap load_labels(const DatasetManifest& manifest, std::size_t index);
MatrixF load_attention(const DatasetManifest& manifest, std::size_t index);
Tensor load_image(const DatasetManifest& manifest, std::size_t index);

}  // namespace repprobe
