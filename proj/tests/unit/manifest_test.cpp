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

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "repprobe/manifest.hpp"
#include "synthetic.hpp"

namespace repprobe {
namespace {

testing::SyntheticSpec three_images() {
  testing::SyntheticSpec spec;
  spec.images = 3;
  spec.dim = 64;
  spec.grid = {4, 4};
  spec.attention = true;
  spec.rgb = true;
  return spec;
}

TEST(Manifest, ConsistentDatasetValidates) {
  testing::TempDir dir;
  const auto path = testing::write_synthetic_dataset(three_images(), dir.path());
  const DatasetManifest m = load_manifest(path);
  const ValidationReport report = validate_manifest(m);
  EXPECT_TRUE(report.ok()) << report.to_json().dump(2);
  EXPECT_EQ(m.images.size(), 3u);
  EXPECT_EQ(m.root, dir.path());
  EXPECT_TRUE(m.has_attention());
}

TEST(Manifest, JsonRoundTrip) {
  testing::TempDir dir;
  const DatasetManifest m = load_manifest(testing::write_synthetic_dataset(three_images(), dir.path()));
  const DatasetManifest back = manifest_from_json(manifest_to_json(m), m.root);
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
}

TEST(Manifest, WrongEmbeddingWidthIsOneShapeViolation) {
  testing::TempDir dir;
  const DatasetManifest m = load_manifest(testing::write_synthetic_dataset(three_images(), dir.path()));
  const auto bad = m.resolve(m.images[1].embedding);
  write_tensor(matrix_tensor(MatrixF(16, 63, 0.5f)), bad);
  const ValidationReport report = validate_manifest(m);
  ASSERT_EQ(report.violations.size(), 1u) << report.to_json().dump(2);
  EXPECT_EQ(report.violations[0].kind, ViolationKind::kShape);
  EXPECT_NE(report.violations[0].path.find(m.images[1].embedding), std::string::npos);
}

TEST(Manifest, MissingLabelFileIsOneExistenceViolation) {
  testing::TempDir dir;
  const DatasetManifest m = load_manifest(testing::write_synthetic_dataset(three_images(), dir.path()));
  std::filesystem::remove(m.resolve(m.images[2].labels));
  const ValidationReport report = validate_manifest(m);
  ASSERT_EQ(report.violations.size(), 1u) << report.to_json().dump(2);
  EXPECT_EQ(report.violations[0].kind, ViolationKind::kExistence);
}

TEST(Manifest, OutOfRangeLabelIsValueViolation) {
  testing::TempDir dir;
  const DatasetManifest m = load_manifest(testing::write_synthetic_dataset(three_images(), dir.path()));
  LabelMap labels = load_labels(m, 0);
  labels.at(0, 0) = 9;  // class_count is 4, ignore is 255
  write_tensor(label_map_tensor(labels), m.resolve(m.images[0].labels));
  const ValidationReport report = validate_manifest(m);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].kind, ViolationKind::kValue);
}

TEST(Manifest, LoadersRefuseSilentReshape) {
  testing::TempDir dir;
  DatasetManifest m = load_manifest(testing::write_synthetic_dataset(three_images(), dir.path()));
  m.embed_dim = 32;
  EXPECT_ERROR_KIND(load_embeddings(m, 0), ErrorKind::kShape);
  m.embed_dim = 64;
  m.image_size = {8, 8};
  EXPECT_ERROR_KIND(load_labels(m, 0), ErrorKind::kShape);
}

TEST(Manifest, SchemaProblemsAreReported) {
  testing::TempDir dir;
  DatasetManifest m = load_manifest(testing::write_synthetic_dataset(three_images(), dir.path()));
  m.image_count = 5;
  m.images[1].id = m.images[0].id;
  const ValidationReport report = validate_manifest(m);
  std::size_t schema = 0;
  for (const auto& v : report.violations) schema += v.kind == ViolationKind::kSchema ? 1 : 0;
  EXPECT_EQ(schema, 2u) << report.to_json().dump(2);

  nlohmann::json doc = manifest_to_json(m);
  doc.erase("embed_dim");
  EXPECT_ERROR_KIND(manifest_from_json(doc, m.root), ErrorKind::kFormat);
}

TEST(Manifest, Float16EmbeddingsAccepted) {
  testing::TempDir dir;
  auto spec = three_images();
  spec.float16 = true;
  const DatasetManifest m = load_manifest(testing::write_synthetic_dataset(spec, dir.path()));
  EXPECT_TRUE(validate_manifest(m).ok());
  EXPECT_EQ(load_embeddings(m, 0).cols(), 64u);
}

}  // namespace
}  // namespace repprobe
