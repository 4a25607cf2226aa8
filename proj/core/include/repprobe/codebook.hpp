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
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "repprobe/manifest.hpp"
#include "repprobe/matrix.hpp"

namespace repprobe {

/// Online cosine k-means settings. A batch is `batch_size` consecutive images;
/// PCA initialization draws every `pca_sample_interval`-th patch from the
/// first `pca_batches` batches.
struct FitConfig {
  std::size_t k = 27;
  std::size_t steps = 5000;
  double learning_rate = 5e-3;
  std::size_t batch_size = 24;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t pca_batches = 96;
  std::size_t pca_sample_interval = 1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static FitConfig from_json(const nlohmann::json& doc);
};

struct Codebook {
  MatrixF centroids;  // k x d, unnormalized
  FitConfig config;
  double final_loss = 0.0;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t k() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
};

/// Throws kDegenerate if any centroid is the zero vector.
void check_codebook(const Codebook& codebook);

struct Assignment {
  std::vector<std::int32_t> ids;
  std::vector<double> similarity;
  std::size_t zero_features = 0;
};

/// Unit-normalized centroids for repeated nearest-centroid queries.
class CentroidIndex {
 public:
  struct Hit {
    std::int32_t id = 0;
    double similarity = 0.0;
  };

  explicit CentroidIndex(const MatrixF& centroids);

  std::size_t k() const { return unit_.rows(); }
  std::size_t dim() const { return unit_.cols(); }

  /// argmax_k cos(feature, c_k); ties go to the smallest index and a zero
  /// feature maps to (0, 0).
  Hit nearest(std::span<const double> feature) const;
  Hit nearest(std::span<const float> feature) const;

  /// Cosine similarity to every centroid (all zero for a zero feature).
  void similarities(std::span<const double> feature, std::span<double> out) const;

 private:
  MatrixD unit_;
};

Assignment assign(const MatrixF& features, const Codebook& codebook);

/// Streaming mean/covariance accumulator in float64.
class PcaAccumulator {
 public:
  explicit PcaAccumulator(std::size_t dim);

  void add(std::span<const float> sample);
  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }

  /// Unbiased sample covariance of everything added so far.
  MatrixD covariance() const;

 private:
  std::size_t dim_;
  std::size_t count_ = 0;
  std::vector<double> shift_;
  std::vector<double> sum_;
  std::vector<double> cross_;  // dim x dim, upper triangle used
};

struct PrincipalComponents {
  MatrixD directions;           // rows: unit vectors, descending variance, sign-fixed
  std::vector<double> variances;
  std::size_t rank = 0;         // numerical rank of the covariance
};

/// Top-`k` principal directions of a covariance, sign-fixed so each vector's
/// largest-magnitude component is positive.
PrincipalComponents principal_components(const MatrixD& covariance, std::size_t k);

/// Codebook whose centroids are the top-k principal directions of the
/// mean-centered sample. Throws kDegenerate when M < k or rank < k.
Codebook pca_init(const MatrixF& sample, std::size_t k);

struct BatchLoss {
  double loss = 0.0;
  MatrixD gradient;  // same shape as the centroids; empty unless requested
};

/// Mean over rows of (1 - max_k cos(f, c_k)); the gradient reaches only each
/// row's winning centroid. Zero rows contribute loss 1 and no gradient.
BatchLoss cosine_kmeans_loss(const MatrixD& batch, const MatrixD& centroids, bool with_gradient);

class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::size_t image_count() const = 0;
  virtual std::size_t dim() const = 0;
  virtual MatrixF load(std::size_t index) const = 0;
};

class InMemoryEmbeddings final : public EmbeddingSource {
 public:
  explicit InMemoryEmbeddings(std::vector<MatrixF> images);

  std::size_t image_count() const override { return images_.size(); }
  std::size_t dim() const override { return images_.empty() ? 0 : images_.front().cols(); }
  MatrixF load(std::size_t index) const override { return images_.at(index); }

 private:
  std::vector<MatrixF> images_;
};

/// Reads embeddings through a manifest, caching decoded images until
/// `cache_bytes` is spent.
class ManifestEmbeddings final : public EmbeddingSource {
 public:
  explicit ManifestEmbeddings(DatasetManifest manifest,
                              std::size_t cache_bytes = std::size_t{2} << 30);
  ~ManifestEmbeddings() override;

  std::size_t image_count() const override { return manifest_.images.size(); }
  std::size_t dim() const override { return manifest_.embed_dim; }
  MatrixF load(std::size_t index) const override;

 private:
  DatasetManifest manifest_;
  std::size_t cache_bytes_;
  mutable std::size_t cached_bytes_ = 0;
  mutable std::vector<std::unique_ptr<MatrixF>> cache_;
};

struct FitLog {
  std::vector<double> loss;          // batch loss before each update
  std::size_t pca_samples = 0;
  std::size_t pca_rank = 0;
  std::size_t random_components = 0;  // centroids seeded randomly for lack of rank
};

/// PCA-initialized online cosine k-means with Adam; runs exactly
/// `config.steps` updates. Bit-reproducible for a fixed (seed, config, source).
Codebook fit(const EmbeddingSource& source, const FitConfig& config, FitLog* log = nullptr);

/// Same optimization, starting from the given centroids.
Codebook fit_from(const EmbeddingSource& source, const FitConfig& config, MatrixD initial,
                  FitLog* log = nullptr);

/// `<stem>.rpt` (k x d float32) plus `<stem>.json` sidecar.
void write_codebook(const Codebook& codebook, const std::filesystem::path& tensor_path);
Codebook read_codebook(const std::filesystem::path& tensor_path);
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

}  // namespace repprobe
