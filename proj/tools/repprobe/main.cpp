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

#include <cstdio>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "app.hpp"
#include "repprobe/parallel.hpp"

namespace {

using namespace repprobe;
using namespace repprobe::app;

struct Flags {
  std::vector<std::string> manifests;
  std::string out = "out";
  std::string codebook;
  std::string predictions;
  std::string pairs;
  std::string grid;
  FitConfig fit;
  double alpha = 0.1;
  double percentile = 95.0;
  bool soft_aggregate = false;
  double soft_temperature = 0.1;
  std::size_t exemplars = 4;
  std::size_t heatmaps = 0;
  bool gt_only = false;
  unsigned threads = 0;
  bool verbose = false;
};

std::optional<GridSize> parse_grid(const std::string& text) {
  if (text.empty()) return std::nullopt;
  static const std::regex pattern(R"((\d+)[xX](\d+))");
  std::smatch match;
  if (!std::regex_match(text, match, pattern)) fail(ErrorKind::kInput, "--grid expects GxG, got '" + text + "'");
  GridSize g{std::stoul(match[1]), std::stoul(match[2])};
  if (g.rows == 0 || g.cols == 0) fail(ErrorKind::kInput, "--grid extents must be positive");
  return g;
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

const fs::path& single_manifest(const Flags& f) {
  static fs::path p;
  if (f.manifests.size() != 1) fail(ErrorKind::kInput, "exactly one --manifest is required");
  p = f.manifests.front();
  return p;
}

void add_common(CLI::App* cmd, Flags& f, bool multi_manifest = false) {
  auto* opt = cmd->add_option("--manifest", f.manifests, "dataset manifest JSON")->required();
  if (!multi_manifest) opt->expected(1);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--threads", f.threads, "worker threads (env REPPROBE_THREADS)");
}

void add_fit(CLI::App* cmd, Flags& f) {
  cmd->add_option("--k", f.fit.k, "number of centroids");
  cmd->add_option("--steps", f.fit.steps, "optimizer steps");
  cmd->add_option("--lr", f.fit.learning_rate, "Adam learning rate");
  cmd->add_option("--batch", f.fit.batch_size, "images per batch");
  cmd->add_option("--pca-batches", f.fit.pca_batches, "batches sampled for PCA init");
  cmd->add_option("--pca-interval", f.fit.pca_sample_interval, "patch stride for PCA sample");
  cmd->add_option("--seed", f.fit.seed, "random seed");
}

void add_pipeline(CLI::App* cmd, Flags& f) {
  add_fit(cmd, f);
  cmd->add_option("--codebook", f.codebook, "codebook tensor (fit inline when absent)");
  cmd->add_option("--grid", f.grid, "positional grid GxG");
  cmd->add_option("--alpha", f.alpha, "PCK threshold factor");
  cmd->add_option("--percentile", f.percentile, "attention binarization percentile");
  cmd->add_flag("--soft-aggregate", f.soft_aggregate, "softmax cluster probabilities in the aggregate map");
  cmd->add_option("--soft-temperature", f.soft_temperature, "softmax temperature");
  cmd->add_option("--exemplars", f.exemplars, "images in the panel");
  cmd->add_flag("--gt-only", f.gt_only, "positional report and aggregate for ground truth only");
}

PipelineOptions pipeline_options(const Flags& f, unsigned threads) {
  PipelineOptions po;
  po.out = f.out;
  po.codebook = optional_path(f.codebook);
  po.fit = f.fit;
  po.grid = parse_grid(f.grid);
  po.alpha = f.alpha;
  po.percentile = f.percentile;
  po.soft_aggregate = f.soft_aggregate;
  po.soft_temperature = f.soft_temperature;
  po.exemplars = f.exemplars;
  po.gt_only = f.gt_only;
  po.threads = threads;
  return po;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_st("repprobe");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App cli{"Probe vision-transformer patch representations"};
  cli.set_config("--config", "", "config file (TOML/INI); command-line flags override it");
  cli.require_subcommand(1);
  Flags f;
  cli.add_flag("-v,--verbose", f.verbose, "debug logging");

  auto* fit_cmd = cli.add_subcommand("fit", "fit a k-means codebook");
  add_common(fit_cmd, f);
  add_fit(fit_cmd, f);

  auto* seg_cmd = cli.add_subcommand("segment", "assign every pixel to its nearest centroid");
  add_common(seg_cmd, f);
  seg_cmd->add_option("--codebook", f.codebook, "codebook tensor")->required();

  auto* eval_cmd = cli.add_subcommand("evaluate", "match clusters to classes and score mIoU");
  add_common(eval_cmd, f);
  eval_cmd->add_option("--predictions", f.predictions, "predictions.json")->required();

  auto* pos_cmd = cli.add_subcommand("posbias", "positional mutual information");
  add_common(pos_cmd, f);
  pos_cmd->add_option("--predictions", f.predictions, "predictions.json");
  pos_cmd->add_option("--grid", f.grid, "positional grid GxG");

  auto* loc_cmd = cli.add_subcommand("locality", "attention locality per layer");
  add_common(loc_cmd, f, true);
  loc_cmd->add_option("--percentile", f.percentile, "binarization percentile");

  auto* corr_cmd = cli.add_subcommand("correspond", "zero-shot keypoint correspondence");
  add_common(corr_cmd, f);
  corr_cmd->add_option("--pairs", f.pairs, "keypoint pairs JSONL (default: manifest keypoints)");
  corr_cmd->add_option("--alpha", f.alpha, "PCK threshold factor");
  corr_cmd->add_option("--heatmaps", f.heatmaps, "similarity heatmaps to write");

  auto* agg_cmd = cli.add_subcommand("aggregate", "dataset-wide class frequency maps");
  add_common(agg_cmd, f);
  agg_cmd->add_option("--predictions", f.predictions, "predictions.json")->required();
  agg_cmd->add_option("--codebook", f.codebook, "codebook (needed for --soft-aggregate)");
  agg_cmd->add_flag("--soft-aggregate", f.soft_aggregate, "softmax cluster probabilities");
  agg_cmd->add_option("--soft-temperature", f.soft_temperature, "softmax temperature");

  auto* render_cmd = cli.add_subcommand("render", "exemplar panel");
  add_common(render_cmd, f);
  render_cmd->add_option("--predictions", f.predictions, "predictions.json")->required();
  render_cmd->add_option("--exemplars", f.exemplars, "images in the panel");

  auto* validate_cmd = cli.add_subcommand("validate", "check a manifest and its files");
  validate_cmd->add_option("--manifest", f.manifests, "dataset manifest JSON")->required()->expected(1);

  auto* pipe_cmd = cli.add_subcommand("pipeline", "fit or load a codebook and run every probe");
  add_common(pipe_cmd, f);
  add_pipeline(pipe_cmd, f);

  auto* sweep_cmd = cli.add_subcommand("sweep", "run the pipeline over several manifests");
  add_common(sweep_cmd, f, true);
  add_pipeline(sweep_cmd, f);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (f.verbose) spdlog::set_level(spdlog::level::debug);

  try {
    const unsigned threads =
        resolve_thread_count(f.threads == 0 ? std::nullopt : std::optional<unsigned>(f.threads));
    const fs::path out = f.out;

    if (*fit_cmd) {
      f.fit.validate();
      run_fit({single_manifest(f), out, f.fit});
    } else if (*seg_cmd) {
      run_segment({single_manifest(f), f.codebook, out, threads});
    } else if (*eval_cmd) {
      const auto match = run_evaluate(single_manifest(f), f.predictions, out);
      std::cout << match.to_json().dump() << '\n';
    } else if (*pos_cmd) {
      const auto doc = run_posbias(single_manifest(f), optional_path(f.predictions), parse_grid(f.grid), out);
      std::cout << doc.dump() << '\n';
    } else if (*loc_cmd) {
      std::vector<fs::path> paths(f.manifests.begin(), f.manifests.end());
      std::cout << run_locality(paths, f.percentile, out, threads).dump() << '\n';
    } else if (*corr_cmd) {
      const auto r = run_correspond(single_manifest(f), optional_path(f.pairs), f.alpha, f.heatmaps, out);
      std::cout << r.to_json().dump() << '\n';
    } else if (*agg_cmd) {
      run_aggregate(single_manifest(f), f.predictions, optional_path(f.codebook), f.soft_aggregate,
                    f.soft_temperature, out);
    } else if (*render_cmd) {
      run_render(single_manifest(f), f.predictions, f.exemplars, out);
    } else if (*validate_cmd) {
      const DatasetManifest m = load_manifest(single_manifest(f));
      const ValidationReport report = validate_manifest(m);
      std::cout << report.to_json().dump(2) << '\n';
      if (!report.ok()) {
        for (const auto& v : report.violations) {
          spdlog::error("{}: {}: {}", to_string(v.kind), v.path, v.message);
        }
        return kExitValidation;
      }
    } else if (*pipe_cmd) {
      f.fit.validate();
      PipelineOptions po = pipeline_options(f, threads);
      po.manifest = single_manifest(f);
      const auto result = run_pipeline(po);
      std::cout << result.record.to_json().dump() << '\n';
    } else if (*sweep_cmd) {
      f.fit.validate();
      SweepOptions so;
      so.manifests.assign(f.manifests.begin(), f.manifests.end());
      so.pipeline = pipeline_options(f, threads);
      const auto result = run_sweep(so);
      if (result.records.empty()) {
        spdlog::error("every sweep run failed");
        return kExitValidation;
      }
      std::cout << result.summary.to_json().dump() << '\n';
    }
  } catch (const StageError& e) {
    spdlog::error("stage {} failed: {}", e.stage(), e.what());
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("unexpected: {}", e.what());
    return kExitIo;
  }
  return kExitOk;
}
