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

#include "repprobe/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace repprobe {
namespace {

namespace fs = std::filesystem;

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename A>
double norm(std::span<const A> a) {
  return std::sqrt(dot(a, a));
}

template <typename T>
CentroidIndex::Hit nearest_impl(const MatrixD& unit, std::span<const T> feature) {
  if (feature.size() != unit.cols()) {
    fail(ErrorKind::kShape, "feature dimension " + std::to_string(feature.size()) +
                                " does not match codebook dimension " + std::to_string(unit.cols()));
  }
  const double fn = norm(feature);
  if (fn == 0.0) return {0, 0.0};
  CentroidIndex::Hit best{0, -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < unit.rows(); ++k) {
    const double s = dot(unit.row(k), feature) / fn;
    if (s > best.similarity) best = {static_cast<std::int32_t>(k), s};
  }
  best.similarity = std::clamp(best.similarity, -1.0, 1.0);
  return best;
}

// Portable standard normal draws: mt19937_64 bits through Box-Muller, so the
// sequence does not depend on the standard library's distribution code.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void check_finite(const MatrixF& features, std::size_t image_index) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (float v : features.row(r)) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::kData, "non-finite feature in image " + std::to_string(image_index) +
                                   ", patch " + std::to_string(r));
      }
    }
  }
}

}  // namespace

void FitConfig::validate() const {
  if (k < 1) fail(ErrorKind::kInput, "k must be >= 1");
  if (steps < 1) fail(ErrorKind::kInput, "steps must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorKind::kInput, "learning_rate must be > 0");
  if (batch_size < 1) fail(ErrorKind::kInput, "batch_size must be >= 1");
  if (pca_batches < 1) fail(ErrorKind::kInput, "pca_batches must be >= 1");
  if (pca_sample_interval < 1) fail(ErrorKind::kInput, "pca_sample_interval must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorKind::kInput, "Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail(ErrorKind::kInput, "adam_epsilon must be > 0");
}

nlohmann::json FitConfig::to_json() const {
  return {{"k", k},
          {"steps", steps},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_epsilon", adam_epsilon},
          {"pca_batches", pca_batches},
          {"pca_sample_interval", pca_sample_interval},
          {"seed", seed}};
}

FitConfig FitConfig::from_json(const nlohmann::json& doc) {
  FitConfig c;
  c.k = doc.value("k", c.k);
  c.steps = doc.value("steps", c.steps);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.adam_beta1 = doc.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = doc.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = doc.value("adam_epsilon", c.adam_epsilon);
  c.pca_batches = doc.value("pca_batches", c.pca_batches);
  c.pca_sample_interval = doc.value("pca_sample_interval", c.pca_sample_interval);
  c.seed = doc.value("seed", c.seed);
  return c;
}

void check_codebook(const Codebook& codebook) {
  if (codebook.k() == 0 || codebook.dim() == 0) fail(ErrorKind::kInput, "empty codebook");
  for (std::size_t k = 0; k < codebook.k(); ++k) {
    if (norm(codebook.centroids.row(k)) == 0.0) {
      fail(ErrorKind::kDegenerate, "centroid " + std::to_string(k) + " is the zero vector");
    }
  }
}

CentroidIndex::CentroidIndex(const MatrixF& centroids) : unit_(centroids.rows(), centroids.cols()) {
  for (std::size_t k = 0; k < centroids.rows(); ++k) {
    const double n = norm(centroids.row(k));
    if (n == 0.0) fail(ErrorKind::kDegenerate, "centroid " + std::to_string(k) + " is the zero vector");
    for (std::size_t j = 0; j < centroids.cols(); ++j) unit_(k, j) = centroids(k, j) / n;
  }
}

CentroidIndex::Hit CentroidIndex::nearest(std::span<const double> feature) const {
  return nearest_impl(unit_, feature);
}

CentroidIndex::Hit CentroidIndex::nearest(std::span<const float> feature) const {
  return nearest_impl(unit_, feature);
}

void CentroidIndex::similarities(std::span<const double> feature, std::span<double> out) const {
  if (feature.size() != unit_.cols() || out.size() != unit_.rows()) {
    fail(ErrorKind::kShape, "similarity buffer does not match codebook shape");
  }
  const double fn = norm(feature);
  for (std::size_t k = 0; k < unit_.rows(); ++k) {
    out[k] = fn == 0.0 ? 0.0 : std::clamp(dot(unit_.row(k), feature) / fn, -1.0, 1.0);
  }
}

Assignment assign(const MatrixF& features, const Codebook& codebook) {
  if (features.cols() != codebook.dim()) {
    fail(ErrorKind::kShape, "features have d=" + std::to_string(features.cols()) +
                                ", codebook has d=" + std::to_string(codebook.dim()));
  }
  const CentroidIndex index(codebook.centroids);
  Assignment out;
  out.ids.resize(features.rows());
  out.similarity.resize(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto row = features.row(i);
    if (norm(row) == 0.0) ++out.zero_features;
    const auto hit = index.nearest(row);
    out.ids[i] = hit.id;
    out.similarity[i] = hit.similarity;
  }
  return out;
}

PcaAccumulator::PcaAccumulator(std::size_t dim)
    : dim_(dim), shift_(dim, 0.0), sum_(dim, 0.0), cross_(dim * dim, 0.0) {}

void PcaAccumulator::add(std::span<const float> sample) {
  if (sample.size() != dim_) fail(ErrorKind::kShape, "PCA sample dimension mismatch");
  if (count_ == 0) std::copy(sample.begin(), sample.end(), shift_.begin());
  std::vector<double> x(dim_);
  for (std::size_t i = 0; i < dim_; ++i) x[i] = static_cast<double>(sample[i]) - shift_[i];
  for (std::size_t i = 0; i < dim_; ++i) {
    sum_[i] += x[i];
    double* row = cross_.data() + i * dim_;
    for (std::size_t j = i; j < dim_; ++j) row[j] += x[i] * x[j];
  }
  ++count_;
}

MatrixD PcaAccumulator::covariance() const {
  MatrixD cov(dim_, dim_);
  if (count_ < 2) return cov;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) {
      const double c = (cross_[i * dim_ + j] - sum_[i] * sum_[j] / n) / (n - 1.0);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

PrincipalComponents principal_components(const MatrixD& covariance, std::size_t k) {
  const std::size_t d = covariance.rows();
  if (covariance.cols() != d) fail(ErrorKind::kShape, "covariance must be square");
  Eigen::MatrixXd cov(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) cov(i, j) = covariance(i, j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail(ErrorKind::kDegenerate, "eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  PrincipalComponents pc;
  const double largest = d > 0 ? values(d - 1) : 0.0;
  const double tol = largest * 1e-10;
  for (std::size_t i = 0; i < d; ++i) {
    if (largest > 0.0 && values(i) > tol) ++pc.rank;
  }
  const std::size_t take = std::min(k, d);
  pc.directions = MatrixD(take, d);
  pc.variances.resize(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto col = static_cast<Eigen::Index>(d - 1 - r);
    pc.variances[r] = std::max(values(col), 0.0);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(vectors(j, col)) > std::abs(vectors(arg, col))) arg = j;
    }
    const double sign = vectors(arg, col) < 0.0 ? -1.0 : 1.0;
    const double n = vectors.col(col).norm();
    for (std::size_t j = 0; j < d; ++j) pc.directions(r, j) = sign * vectors(j, col) / n;
  }
  return pc;
}

Codebook pca_init(const MatrixF& sample, std::size_t k) {
  if (k < 1) fail(ErrorKind::kInput, "k must be >= 1");
  if (sample.rows() < k) {
    fail(ErrorKind::kDegenerate, "PCA sample has " + std::to_string(sample.rows()) +
                                     " rows, need at least k=" + std::to_string(k));
  }
  if (sample.cols() < k) {
    fail(ErrorKind::kDegenerate, "embedding dimension " + std::to_string(sample.cols()) +
                                     " is below k=" + std::to_string(k));
  }
  PcaAccumulator acc(sample.cols());
  for (std::size_t r = 0; r < sample.rows(); ++r) acc.add(sample.row(r));
  const PrincipalComponents pc = principal_components(acc.covariance(), k);
  if (pc.rank < k) {
    fail(ErrorKind::kDegenerate, "centered PCA sample has rank " + std::to_string(pc.rank) +
                                     " < k=" + std::to_string(k));
  }
  Codebook cb;
  cb.config.k = k;
  cb.centroids = pc.directions.cast<float>();
  return cb;
}

BatchLoss cosine_kmeans_loss(const MatrixD& batch, const MatrixD& centroids, bool with_gradient) {
  if (batch.cols() != centroids.cols()) fail(ErrorKind::kShape, "batch/centroid dimension mismatch");
  if (batch.rows() == 0) fail(ErrorKind::kInput, "empty batch");
  const std::size_t k_count = centroids.rows();
  const std::size_t d = centroids.cols();
  std::vector<double> cnorm(k_count);
  for (std::size_t k = 0; k < k_count; ++k) cnorm[k] = norm(centroids.row(k));

  BatchLoss out;
  if (with_gradient) out.gradient = MatrixD(k_count, d);
  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto f = batch.row(i);
    const double fn = norm(f);
    if (fn == 0.0) {
      total += 1.0;
      continue;
    }
    std::size_t win = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
      const double s = cnorm[k] == 0.0 ? 0.0 : dot(centroids.row(k), f) / (fn * cnorm[k]);
      if (s > best) {
        best = s;
        win = k;
      }
    }
    total += 1.0 - best;
    if (with_gradient && cnorm[win] > 0.0) {
      // d/dc [1 - cos(f, c)] = -(f / (|f||c|) - cos * c / |c|^2)
      const double a = inv_b / (fn * cnorm[win]);
      const double b = inv_b * best / (cnorm[win] * cnorm[win]);
      auto g = out.gradient.row(win);
      const auto c = centroids.row(win);
      for (std::size_t j = 0; j < d; ++j) g[j] += -a * f[j] + b * c[j];
    }
  }
  out.loss = total * inv_b;
  return out;
}

InMemoryEmbeddings::InMemoryEmbeddings(std::vector<MatrixF> images) : images_(std::move(images)) {
  for (const auto& m : images_) {
    if (m.cols() != images_.front().cols()) {
      fail(ErrorKind::kShape, "embedding dimension differs between images");
    }
  }
}

ManifestEmbeddings::ManifestEmbeddings(DatasetManifest manifest, std::size_t cache_bytes)
    : manifest_(std::move(manifest)), cache_bytes_(cache_bytes), cache_(manifest_.images.size()) {}

ManifestEmbeddings::~ManifestEmbeddings() = default;

MatrixF ManifestEmbeddings::load(std::size_t index) const {
  if (cache_.at(index)) return *cache_[index];
  MatrixF m = load_embeddings(manifest_, index);
  const std::size_t bytes = m.size() * sizeof(float);
  if (cached_bytes_ + bytes <= cache_bytes_) {
    cache_[index] = std::make_unique<MatrixF>(m);
    cached_bytes_ += bytes;
  }
  return m;
}

Codebook fit(const EmbeddingSource& source, const FitConfig& config, FitLog* log) {
  config.validate();
  const std::size_t n = source.image_count();
  if (n == 0) fail(ErrorKind::kInput, "empty embedding stream");
  const std::size_t d = source.dim();

  // PCA over the first pca_batches batches, without cycling past the dataset.
  const std::size_t pca_images = std::min(n, config.pca_batches * config.batch_size);
  PcaAccumulator acc(d);
  std::size_t patch_counter = 0;
  for (std::size_t i = 0; i < pca_images; ++i) {
    const MatrixF f = source.load(i);
    if (f.cols() != d) fail(ErrorKind::kShape, "image " + std::to_string(i) + " has wrong dimension");
    check_finite(f, i);
    for (std::size_t r = 0; r < f.rows(); ++r, ++patch_counter) {
      if (patch_counter % config.pca_sample_interval == 0) acc.add(f.row(r));
    }
  }
  const PrincipalComponents pc = principal_components(acc.covariance(), config.k);
  const std::size_t usable = acc.count() >= config.k ? std::min(pc.rank, pc.directions.rows()) : 0;

  MatrixD initial(config.k, d);
  for (std::size_t r = 0; r < usable; ++r) {
    for (std::size_t j = 0; j < d; ++j) initial(r, j) = pc.directions(r, j);
  }
  // Rank-deficient samples leave some components undefined; those centroids
  // start at seeded random unit directions.
  GaussianStream gauss(config.seed);
  for (std::size_t r = usable; r < config.k; ++r) {
    double nn = 0.0;
    while (nn == 0.0) {
      nn = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        initial(r, j) = gauss.next();
        nn += initial(r, j) * initial(r, j);
      }
    }
    nn = std::sqrt(nn);
    for (std::size_t j = 0; j < d; ++j) initial(r, j) /= nn;
  }
  if (log) {
    log->pca_samples = acc.count();
    log->pca_rank = pc.rank;
    log->random_components = config.k - usable;
  }
  return fit_from(source, config, std::move(initial), log);
}

Codebook fit_from(const EmbeddingSource& source, const FitConfig& config, MatrixD centroids,
                  FitLog* log) {
  config.validate();
  const std::size_t n = source.image_count();
  if (n == 0) fail(ErrorKind::kInput, "empty embedding stream");
  const std::size_t d = source.dim();
  if (centroids.rows() != config.k || centroids.cols() != d) {
    fail(ErrorKind::kShape, "initial centroids must be k x d");
  }

  std::vector<bool> checked(n, false);
  MatrixD m(config.k, d);
  MatrixD v(config.k, d);
  double b1t = 1.0;
  double b2t = 1.0;
  double last_loss = 0.0;
  std::size_t cursor = 0;
  if (log) log->loss.reserve(log->loss.size() + config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<MatrixF> images;
    std::size_t rows = 0;
    for (std::size_t j = 0; j < config.batch_size; ++j) {
      const std::size_t idx = cursor;
      cursor = (cursor + 1) % n;
      MatrixF f = source.load(idx);
      if (f.cols() != d) fail(ErrorKind::kShape, "image " + std::to_string(idx) + " has wrong dimension");
      if (!checked[idx]) {
        check_finite(f, idx);
        checked[idx] = true;
      }
      rows += f.rows();
      images.push_back(std::move(f));
    }
    MatrixD batch(rows, d);
    std::size_t r0 = 0;
    for (const auto& f : images) {
      std::copy(f.values().begin(), f.values().end(), batch.values().begin() + r0 * d);
      r0 += f.rows();
    }

    const BatchLoss bl = cosine_kmeans_loss(batch, centroids, true);
    last_loss = bl.loss;
    if (log) log->loss.push_back(bl.loss);

    b1t *= config.adam_beta1;
    b2t *= config.adam_beta2;
    const double c1 = 1.0 - b1t;
    const double c2 = 1.0 - b2t;
    auto g = bl.gradient.values();
    auto mv = m.values();
    auto vv = v.values();
    auto cv = centroids.values();
    for (std::size_t i = 0; i < cv.size(); ++i) {
      mv[i] = config.adam_beta1 * mv[i] + (1.0 - config.adam_beta1) * g[i];
      vv[i] = config.adam_beta2 * vv[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
      const double mhat = mv[i] / c1;
      const double vhat = vv[i] / c2;
      cv[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
    }
    for (double x : cv) {
      if (!std::isfinite(x)) fail(ErrorKind::kDegenerate, "centroids diverged at step " + std::to_string(step));
    }
  }

  Codebook cb;
  cb.centroids = centroids.cast<float>();
  cb.config = config;
  cb.final_loss = last_loss;
  check_codebook(cb);
  return cb;
}

fs::path sidecar_path(const fs::path& tensor_path) {
  fs::path p = tensor_path;
  p.replace_extension(".json");
  return p;
}

void write_codebook(const Codebook& codebook, const fs::path& tensor_path) {
  check_codebook(codebook);
  write_tensor(matrix_tensor(codebook.centroids), tensor_path);
  nlohmann::json side;
  side["k"] = codebook.k();
  side["d"] = codebook.dim();
  side["config"] = codebook.config.to_json();
  side["seed"] = codebook.config.seed;
  side["final_loss"] = codebook.final_loss;
  side["provenance"] = codebook.provenance;
  write_json(side, sidecar_path(tensor_path));
}

Codebook read_codebook(const fs::path& tensor_path) {
  Codebook cb;
  cb.centroids = read_tensor(tensor_path).to_matrix();
  const fs::path side = sidecar_path(tensor_path);
  std::error_code ec;
  if (fs::is_regular_file(side, ec)) {
    const auto doc = read_json(side);
    try {
      cb.config = FitConfig::from_json(doc.value("config", nlohmann::json::object()));
      cb.final_loss = doc.value("final_loss", 0.0);
      cb.provenance = doc.value("provenance", nlohmann::json::object());
      if (doc.value("k", cb.k()) != cb.k() || doc.value("d", cb.dim()) != cb.dim()) {
        fail(ErrorKind::kShape, side.string() + " disagrees with centroid tensor shape");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, side.string() + ": " + e.what());
    }
  }
  cb.config.k = cb.k();
  check_codebook(cb);
  return cb;
}

}  // namespace repprobe
