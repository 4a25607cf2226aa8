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

#include "repprobe/manifest.hpp"

#include <set>

namespace repprobe {
namespace {

namespace fs = std::filesystem;

GridSize grid_from_json(const nlohmann::json& j, const char* field) {
  const auto& v = j.at(field);
  if (!v.is_array() || v.size() != 2) {
    fail(ErrorKind::kFormat, std::string(field) + " must be [rows, cols]");
  }
  GridSize g{v[0].get<std::size_t>(), v[1].get<std::size_t>()};
  if (g.rows == 0 || g.cols == 0) fail(ErrorKind::kFormat, std::string(field) + " must be positive");
  return g;
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Returns the header if the file exists and parses; records a violation otherwise.
std::optional<TensorHeader> probe(const fs::path& path, std::vector<Violation>& out) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    out.push_back({ViolationKind::kExistence, path.string(), "file does not exist"});
    return std::nullopt;
  }
  try {
    return read_tensor_header(path);
  } catch (const Error& e) {
    out.push_back({ViolationKind::kFormat, path.string(), e.what()});
    return std::nullopt;
  }
}

void expect_shape(const TensorHeader& header, const std::vector<std::uint64_t>& expected,
                  const fs::path& path, std::vector<Violation>& out) {
  if (header.shape != expected) {
    out.push_back({ViolationKind::kShape, path.string(),
                   "shape " + shape_string(header.shape) + " does not match expected " +
                       shape_string(expected)});
  }
}

void expect_dtype(const TensorHeader& header, std::initializer_list<DType> allowed,
                  const fs::path& path, std::vector<Violation>& out) {
  for (DType d : allowed) {
    if (header.dtype == d) return;
  }
  out.push_back({ViolationKind::kFormat, path.string(),
                 "unexpected dtype " + std::string(to_string(header.dtype))});
}

}  // namespace

std::string to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::kKey: return "key";
    case EmbeddingKind::kQuery: return "query";
    case EmbeddingKind::kValue: return "value";
    case EmbeddingKind::kToken: return "token";
  }
  return "token";
}

std::string to_string(LnMode mode) {
  switch (mode) {
    case LnMode::kPre: return "pre";
    case LnMode::kPost: return "post";
    case LnMode::kNotApplicable: return "n/a";
  }
  return "n/a";
}

EmbeddingKind parse_embedding_kind(const std::string& text) {
  if (text == "key") return EmbeddingKind::kKey;
  if (text == "query") return EmbeddingKind::kQuery;
  if (text == "value") return EmbeddingKind::kValue;
  if (text == "token") return EmbeddingKind::kToken;
  fail(ErrorKind::kFormat, "unknown embedding kind '" + text + "'");
}

LnMode parse_ln_mode(const std::string& text) {
  if (text == "pre") return LnMode::kPre;
  if (text == "post") return LnMode::kPost;
  if (text == "n/a") return LnMode::kNotApplicable;
  fail(ErrorKind::kFormat, "unknown ln_mode '" + text + "'");
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kSchema: return "schema";
    case ViolationKind::kExistence: return "existence";
    case ViolationKind::kShape: return "shape";
    case ViolationKind::kFormat: return "format";
    case ViolationKind::kValue: return "value";
  }
  return "schema";
}

fs::path DatasetManifest::resolve(const std::string& ref) const {
  fs::path p(ref);
  return p.is_absolute() ? p : root / p;
}

bool DatasetManifest::has_attention() const {
  if (images.empty()) return false;
  for (const auto& img : images) {
    if (!img.attention) return false;
  }
  return true;
}

DatasetManifest manifest_from_json(const nlohmann::json& doc, fs::path root) {
  DatasetManifest m;
  try {
    m.model_id = doc.at("model_id").get<std::string>();
    m.size_tag = doc.value("size_tag", std::string{});
    m.embedding_kind = parse_embedding_kind(doc.at("embedding_kind").get<std::string>());
    m.layer = doc.at("layer").get<int>();
    if (m.layer < 1) fail(ErrorKind::kFormat, "layer must be >= 1");
    m.patch_grid = grid_from_json(doc, "patch_grid");
    m.embed_dim = doc.at("embed_dim").get<std::size_t>();
    m.image_size = grid_from_json(doc, "image_size");
    m.image_count = doc.at("image_count").get<std::size_t>();
    m.ln_mode = parse_ln_mode(doc.value("ln_mode", std::string("n/a")));
    m.palette = doc.at("palette").get<std::string>();
    m.class_count = doc.at("class_count").get<std::size_t>();
    m.ignore_index = doc.value("ignore_index", kDefaultIgnoreIndex);
    if (doc.contains("keypoints") && !doc["keypoints"].is_null()) {
      m.keypoints = doc["keypoints"].get<std::string>();
    }
    for (const auto& item : doc.at("images")) {
      ImageEntry e;
      e.id = item.at("id").get<std::string>();
      e.embedding = item.at("embedding").get<std::string>();
      e.labels = item.at("labels").get<std::string>();
      if (item.contains("attention") && !item["attention"].is_null()) {
        e.attention = item["attention"].get<std::string>();
      }
      if (item.contains("image") && !item["image"].is_null()) {
        e.image = item["image"].get<std::string>();
      }
      m.images.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("manifest: ") + e.what());
  }
  m.root = std::move(root);
  return m;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json doc;
  doc["model_id"] = m.model_id;
  if (!m.size_tag.empty()) doc["size_tag"] = m.size_tag;
  doc["embedding_kind"] = to_string(m.embedding_kind);
  doc["layer"] = m.layer;
  doc["patch_grid"] = {m.patch_grid.rows, m.patch_grid.cols};
  doc["embed_dim"] = m.embed_dim;
  doc["image_size"] = {m.image_size.rows, m.image_size.cols};
  doc["image_count"] = m.image_count;
  doc["ln_mode"] = to_string(m.ln_mode);
  doc["palette"] = m.palette;
  doc["class_count"] = m.class_count;
  doc["ignore_index"] = m.ignore_index;
  if (m.keypoints) doc["keypoints"] = *m.keypoints;
  auto& images = doc["images"] = nlohmann::json::array();
  for (const auto& e : m.images) {
    nlohmann::json item{{"id", e.id}, {"embedding", e.embedding}, {"labels", e.labels}};
    if (e.attention) item["attention"] = *e.attention;
    if (e.image) item["image"] = *e.image;
    images.push_back(std::move(item));
  }
  return doc;
}

DatasetManifest load_manifest(const fs::path& path) {
  return manifest_from_json(read_json(path), path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  write_json(manifest_to_json(manifest), path);
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json doc;
  doc["ok"] = ok();
  auto& list = doc["violations"] = nlohmann::json::array();
  for (const auto& v : violations) {
    list.push_back({{"kind", to_string(v.kind)}, {"path", v.path}, {"message", v.message}});
  }
  return doc;
}

ValidationReport validate_manifest(const DatasetManifest& manifest, const fs::path& root) {
  DatasetManifest m = manifest;
  m.root = root;
  ValidationReport report;
  auto& out = report.violations;

  if (m.images.size() != m.image_count) {
    out.push_back({ViolationKind::kSchema, "images",
                   "image_count " + std::to_string(m.image_count) + " but " +
                       std::to_string(m.images.size()) + " entries listed"});
  }
  if (m.class_count == 0) out.push_back({ViolationKind::kSchema, "class_count", "must be >= 1"});
  if (m.embed_dim == 0) out.push_back({ViolationKind::kSchema, "embed_dim", "must be >= 1"});

  const fs::path palette_path = m.resolve(m.palette);
  std::error_code ec;
  if (!fs::is_regular_file(palette_path, ec)) {
    out.push_back({ViolationKind::kExistence, palette_path.string(), "file does not exist"});
  } else {
    try {
      const Palette palette = read_palette(palette_path);
      if (palette.size() != m.class_count) {
        out.push_back({ViolationKind::kShape, palette_path.string(),
                       "palette has " + std::to_string(palette.size()) + " entries, class_count is " +
                           std::to_string(m.class_count)});
      }
    } catch (const Error& e) {
      out.push_back({ViolationKind::kFormat, palette_path.string(), e.what()});
    }
  }

  if (m.keypoints) {
    const fs::path kp = m.resolve(*m.keypoints);
    if (!fs::is_regular_file(kp, ec)) {
      out.push_back({ViolationKind::kExistence, kp.string(), "file does not exist"});
    }
  }

  const std::uint64_t n = m.patch_count();
  std::set<std::string> ids;
  for (const auto& img : m.images) {
    if (!ids.insert(img.id).second) {
      out.push_back({ViolationKind::kSchema, img.id, "duplicate image id"});
    }
    const fs::path emb = m.resolve(img.embedding);
    if (auto h = probe(emb, out)) {
      expect_dtype(*h, {DType::kFloat32, DType::kFloat16}, emb, out);
      expect_shape(*h, {n, m.embed_dim}, emb, out);
    }
    const fs::path lab = m.resolve(img.labels);
    if (auto h = probe(lab, out)) {
      expect_dtype(*h, {DType::kUInt8, DType::kInt32}, lab, out);
      expect_shape(*h, {m.image_size.rows, m.image_size.cols}, lab, out);
      if (h->shape.size() == 2 && (h->dtype == DType::kUInt8 || h->dtype == DType::kInt32)) {
        try {
          check_label_range(label_map_from_tensor(read_tensor(lab), m.ignore_index), m.class_count);
        } catch (const Error& e) {
          out.push_back({ViolationKind::kValue, lab.string(), e.what()});
        }
      }
    }
    if (img.attention) {
      const fs::path att = m.resolve(*img.attention);
      if (auto h = probe(att, out)) {
        expect_dtype(*h, {DType::kFloat32, DType::kFloat16}, att, out);
        expect_shape(*h, {n, n}, att, out);
      }
    }
    if (img.image) {
      const fs::path rgb = m.resolve(*img.image);
      if (auto h = probe(rgb, out)) {
        expect_dtype(*h, {DType::kUInt8}, rgb, out);
        expect_shape(*h, {m.image_size.rows, m.image_size.cols, 3}, rgb, out);
      }
    }
  }
  return report;
}

MatrixF load_embeddings(const DatasetManifest& m, std::size_t index) {
  const fs::path path = m.resolve(m.images.at(index).embedding);
  const Tensor t = read_tensor(path);
  if (t.shape() != std::vector<std::uint64_t>{m.patch_count(), m.embed_dim}) {
    fail(ErrorKind::kShape, path.string() + ": embedding shape " + shape_string(t.shape()) +
                                " does not match manifest");
  }
  return t.to_matrix();
}

LabelMap load_labels(const DatasetManifest& m, std::size_t index) {
  const fs::path path = m.resolve(m.images.at(index).labels);
  LabelMap labels = label_map_from_tensor(read_tensor(path), m.ignore_index);
  if (labels.height != m.image_size.rows || labels.width != m.image_size.cols) {
    fail(ErrorKind::kShape, path.string() + ": label map size does not match manifest");
  }
  check_label_range(labels, m.class_count);
  return labels;
}

MatrixF load_attention(const DatasetManifest& m, std::size_t index) {
  const auto& ref = m.images.at(index).attention;
  if (!ref) fail(ErrorKind::kInput, "image " + m.images[index].id + " has no attention file");
  const fs::path path = m.resolve(*ref);
  const Tensor t = read_tensor(path);
  const std::uint64_t n = m.patch_count();
  if (t.shape() != std::vector<std::uint64_t>{n, n}) {
    fail(ErrorKind::kShape, path.string() + ": attention shape " + shape_string(t.shape()) +
                                " does not match N = " + std::to_string(n));
  }
  return t.to_matrix();
}

Tensor load_image(const DatasetManifest& m, std::size_t index) {
  const auto& ref = m.images.at(index).image;
  if (!ref) fail(ErrorKind::kInput, "image " + m.images[index].id + " has no RGB file");
  const fs::path path = m.resolve(*ref);
  Tensor t = read_tensor(path);
  if (t.dtype() != DType::kUInt8 ||
      t.shape() != std::vector<std::uint64_t>{m.image_size.rows, m.image_size.cols, 3}) {
    fail(ErrorKind::kShape, path.string() + ": expected uint8 (H, W, 3)");
  }
  return t;
}

}  // namespace repprobe
