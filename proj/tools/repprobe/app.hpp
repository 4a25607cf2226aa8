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

#include "repprobe/codebook.hpp"
#include "repprobe/correspond.hpp"
#include "repprobe/error.hpp"
#include "repprobe/evalseg.hpp"
#include "repprobe/manifest.hpp"
#include "repprobe/posbias.hpp"
#include "repprobe/report.hpp"

namespace repprobe::app {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

int exit_code_for(ErrorKind kind);

/// An Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct FitOptions {
  fs::path manifest;
  fs::path out;
  FitConfig config;
};

struct SegmentOptions {
  fs::path manifest;
  fs::path codebook;
  fs::path out;
  unsigned threads = 1;
};

struct PipelineOptions {
  fs::path manifest;
  fs::path out;
  std::optional<fs::path> codebook;  // fit inline when empty
  FitConfig fit;
  std::optional<GridSize> grid;      // default: the manifest's patch grid
  double alpha = 0.1;
  double percentile = 95.0;
  bool soft_aggregate = false;
  double soft_temperature = 0.1;
  std::size_t exemplars = 4;
  bool gt_only = false;
  unsigned threads = 1;
};

struct PipelineResult {
  MetricsRecord record;
  std::optional<MatchResult> match;
  std::optional<PositionalReport> pred_positions;
  PositionalReport gt_positions;
  std::optional<PckResult> pck;
};

/// Predicted label maps written by `segment` or `pipeline`.
struct PredictionSet {
  std::size_t clusters = 0;
  std::vector<std::string> ids;
  std::vector<fs::path> files;
};

PredictionSet read_predictions(const fs::path& path);

/// Loads and validates; throws StageError("validate", kValidation) with the
/// report text when violations exist.
DatasetManifest load_valid_manifest(const fs::path& path);

Codebook run_fit(const FitOptions& options);
PredictionSet run_segment(const SegmentOptions& options);
PipelineResult run_pipeline(const PipelineOptions& options);

MatchResult run_evaluate(const fs::path& manifest, const fs::path& predictions, const fs::path& out);
nlohmann::json run_posbias(const fs::path& manifest, const std::optional<fs::path>& predictions,
                           const std::optional<GridSize>& grid, const fs::path& out);
nlohmann::json run_locality(const std::vector<fs::path>& manifests, double percentile,
                            const fs::path& out, unsigned threads);
PckResult run_correspond(const fs::path& manifest, const std::optional<fs::path>& pairs, double alpha,
                         std::size_t heatmaps, const fs::path& out);
void run_aggregate(const fs::path& manifest, const fs::path& predictions,
                   const std::optional<fs::path>& codebook, bool soft, double temperature,
                   const fs::path& out);
void run_render(const fs::path& manifest, const fs::path& predictions, std::size_t exemplars,
                const fs::path& out);

struct SweepOptions {
  std::vector<fs::path> manifests;
  PipelineOptions pipeline;  // manifest/out fields are overridden per run
};

struct SweepResult {
  std::vector<MetricsRecord> records;
  nlohmann::json gaps = nlohmann::json::array();
  SweepSummary summary;
  nlohmann::json correlations;
};

SweepResult run_sweep(const SweepOptions& options);

}  // namespace repprobe::app
