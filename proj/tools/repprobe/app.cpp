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

#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "repprobe/densify.hpp"
#include "repprobe/image.hpp"
#include "repprobe/locality.hpp"
#include "repprobe/parallel.hpp"

namespace repprobe::app {
namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::kIo, "cannot create directory " + dir.string());
}

std::string file_stem_for(const std::string& id) {
  std::string s = id;
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  return s;
}

std::size_t image_index(const DatasetManifest& m, const std::string& id) {
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    if (m.images[i].id == id) return i;
  }
  fail(ErrorKind::kData, "unknown image id '" + id + "'");
}

std::string caption_for(const DatasetManifest& m, const std::string& what) {
  return m.model_id + " L" + std::to_string(m.layer) + " " + to_string(m.embedding_kind) + " " + what;
}

// Segments every image, `threads` at a time, and hands results to `sink` in
// manifest order so all accumulation is order-deterministic.
struct SegmentedImage {
  LabelMap pred;
  std::optional<MatrixF> soft;
};

template <typename Sink>
void segment_dataset(const DatasetManifest& m, const CentroidIndex& index, unsigned threads, bool soft,
                     double temperature, Sink&& sink) {
  const GridSize target = m.image_size;
  const std::size_t n = m.images.size();
  const std::size_t chunk = std::max<std::size_t>(1, std::size_t{threads} * 4);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    std::vector<SegmentedImage> results(end - begin);
    parallel_for(end - begin, threads, [&](std::size_t j) {
      const std::size_t i = begin + j;
      const MatrixF patches = load_embeddings(m, i);
      results[j].pred = segment_patches(patches, m.patch_grid, target, index);
      if (soft) results[j].soft = soft_assignments(patches, m.patch_grid, target, index, temperature);
    });
    for (std::size_t j = 0; j < results.size(); ++j) sink(begin + j, std::move(results[j]));
  }
}

fs::path write_prediction(const fs::path& out_dir, const std::string& id, const LabelMap& pred) {
  const fs::path rel = fs::path("predictions") / (file_stem_for(id) + ".rpt");
  write_tensor(label_map_tensor(pred), out_dir / rel);
  return rel;
}

LabelMap load_prediction(const PredictionSet& set, std::size_t i) {
  LabelMap pred = label_map_from_tensor(read_tensor(set.files.at(i)), kPredictionIgnore);
  check_label_range(pred, set.clusters);
  return pred;
}

void check_predictions_match(const DatasetManifest& m, const PredictionSet& set) {
  if (set.ids.size() != m.images.size()) {
    fail(ErrorKind::kShape, "predictions cover " + std::to_string(set.ids.size()) + " images, manifest has " +
                                std::to_string(m.images.size()));
  }
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    if (set.ids[i] != m.images[i].id) {
      fail(ErrorKind::kData, "prediction " + std::to_string(i) + " is for '" + set.ids[i] +
                                 "', manifest lists '" + m.images[i].id + "'");
    }
  }
}

Contingency contingency_from_predictions(const DatasetManifest& m, const PredictionSet& set) {
  check_predictions_match(m, set);
  Contingency table(set.clusters, m.class_count);
  for (std::size_t i = 0; i < m.images.size(); ++i) table.accumulate(load_prediction(set, i), load_labels(m, i));
  return table;
}

double image_attention_mi(const DatasetManifest& m, std::size_t i) {
  AttentionRecord rec;
  rec.layer = m.layer;
  rec.image_id = m.images[i].id;
  rec.matrix = load_attention(m, i).cast<double>();
  try {
    return attention_mi(rec);
  } catch (const Error& e) {
    throw Error(e.kind(), "image " + m.images[i].id + ": " + e.what());
  }
}

Image attention_png(const DatasetManifest& m, std::size_t i, double pct) {
  AttentionRecord rec;
  rec.layer = m.layer;
  rec.image_id = m.images[i].id;
  rec.matrix = load_attention(m, i).cast<double>();
  return binary_image(binarize_attention(rec, pct));
}

nlohmann::json positional_json(const PositionalReport& report, const std::vector<std::int32_t>* mapping) {
  nlohmann::json j = report.to_json();
  if (mapping) j["cluster_to_class"] = *mapping;
  return j;
}

PckResult correspondence(const DatasetManifest& m, const std::vector<KeypointPair>& pairs, double alpha,
                         std::size_t heatmaps, const fs::path& out) {
  std::vector<PredictedKeypoint> predicted;
  predicted.reserve(pairs.size());
  std::string loaded_src, loaded_tgt;
  DenseFeatureMap src, tgt;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    if (pair.source_id != loaded_src) {
      src = upsample_bilinear(load_embeddings(m, image_index(m, pair.source_id)), m.patch_grid, m.image_size);
      loaded_src = pair.source_id;
    }
    if (pair.target_id != loaded_tgt) {
      tgt = upsample_bilinear(load_embeddings(m, image_index(m, pair.target_id)), m.patch_grid, m.image_size);
      loaded_tgt = pair.target_id;
    }
    predicted.push_back({pair, match_point(src, tgt, pair.source)});
    if (p < heatmaps) {
      const auto heat = similarity_heatmap(src, tgt, pair.source);
      write_png(grayscale_image(heat, tgt.height, tgt.width), out / ("heatmap_" + std::to_string(p) + ".png"));
    }
  }
  return pck(predicted, alpha);
}

MetricsRecord base_record(const DatasetManifest& m, const fs::path& manifest_path) {
  MetricsRecord r;
  r.model = m.model_id;
  r.size = m.size_tag;
  r.kind = to_string(m.embedding_kind);
  r.layer = m.layer;
  r.provenance["manifest"] = manifest_path.string();
  r.provenance["ln_mode"] = to_string(m.ln_mode);
  return r;
}

void write_metrics(const fs::path& out, const PipelineResult& result) {
  nlohmann::json doc;
  doc["record"] = result.record.to_json();
  doc["gt_nmi"] = result.gt_positions.nmi ? nlohmann::json(*result.gt_positions.nmi) : nlohmann::json(nullptr);
  write_json(doc, out / "metrics.json");
  write_text(metrics_csv(std::span<const MetricsRecord>(&result.record, 1)), out / "metrics.csv");
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat:
    case ErrorKind::kCorruption:
    case ErrorKind::kVersion:
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kDegenerate:
      return kExitNumeric;
    case ErrorKind::kShape:
    case ErrorKind::kData:
    case ErrorKind::kInput:
    case ErrorKind::kUnsupported:
    case ErrorKind::kValidation:
    case ErrorKind::kRender:
      return kExitValidation;
  }
  return kExitUsage;
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.kind(), "[" + stage + "] " + cause.what()), stage_(std::move(stage)) {}

DatasetManifest load_valid_manifest(const fs::path& path) {
  return stage("validate", [&] {
    DatasetManifest m = load_manifest(path);
    const ValidationReport report = validate_manifest(m);
    if (!report.ok()) {
      std::ostringstream msg;
      msg << path.string() << " has " << report.violations.size() << " violation(s)";
      for (const auto& v : report.violations) {
        msg << "\n  " << to_string(v.kind) << ": " << v.path << ": " << v.message;
      }
      fail(ErrorKind::kValidation, msg.str());
    }
    return m;
  });
}

PredictionSet read_predictions(const fs::path& path) {
  const auto doc = read_json(path);
  PredictionSet set;
  try {
    set.clusters = doc.at("clusters").get<std::size_t>();
    for (const auto& item : doc.at("images")) {
      set.ids.push_back(item.at("id").get<std::string>());
      fs::path f = item.at("labels").get<std::string>();
      set.files.push_back(f.is_absolute() ? f : path.parent_path() / f);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  if (set.clusters == 0) fail(ErrorKind::kFormat, path.string() + ": clusters must be >= 1");
  return set;
}

Codebook run_fit(const FitOptions& options) {
  const DatasetManifest m = load_valid_manifest(options.manifest);
  ensure_dir(options.out);
  FitLog log;
  Codebook cb = stage("fit", [&] {
    const ManifestEmbeddings source(m);
    spdlog::info("fitting k={} on {} images ({} steps, batch {})", options.config.k, m.images.size(),
                 options.config.steps, options.config.batch_size);
    return fit(source, options.config, &log);
  });
  cb.provenance = {{"model_id", m.model_id},
                   {"size_tag", m.size_tag},
                   {"layer", m.layer},
                   {"embedding_kind", to_string(m.embedding_kind)},
                   {"manifest", options.manifest.string()},
                   {"pca_samples", log.pca_samples},
                   {"pca_rank", log.pca_rank},
                   {"random_components", log.random_components}};
  stage("write", [&] {
    write_codebook(cb, options.out / "codebook.rpt");
    std::ostringstream csv;
    csv << "step,loss\n";
    for (std::size_t s = 0; s < log.loss.size(); ++s) csv << s << ',' << nlohmann::json(log.loss[s]).dump() << '\n';
    write_text(csv.str(), options.out / "fit_log.csv");
  });
  spdlog::info("fit done, final loss {:.6f}", cb.final_loss);
  return cb;
}

PredictionSet run_segment(const SegmentOptions& options) {
  const DatasetManifest m = load_valid_manifest(options.manifest);
  const Codebook cb = stage("load", [&] { return read_codebook(options.codebook); });
  if (cb.dim() != m.embed_dim) {
    throw StageError("segment", Error(ErrorKind::kShape, "codebook d=" + std::to_string(cb.dim()) +
                                                             " but manifest embed_dim=" + std::to_string(m.embed_dim)));
  }
  ensure_dir(options.out / "predictions");
  const CentroidIndex index(cb.centroids);
  PredictionSet set;
  set.clusters = cb.k();
  nlohmann::json doc{{"clusters", cb.k()}, {"images", nlohmann::json::array()}};
  stage("segment", [&] {
    segment_dataset(m, index, options.threads, false, 0.0, [&](std::size_t i, SegmentedImage&& r) {
      const fs::path rel = write_prediction(options.out, m.images[i].id, r.pred);
      doc["images"].push_back({{"id", m.images[i].id}, {"labels", rel.string()}});
      set.ids.push_back(m.images[i].id);
      set.files.push_back(options.out / rel);
    });
    write_json(doc, options.out / "predictions.json");
  });
  return set;
}

PipelineResult run_pipeline(const PipelineOptions& options) {
  const DatasetManifest m = load_valid_manifest(options.manifest);
  ensure_dir(options.out);
  const Palette palette = stage("load", [&] { return read_palette(m.resolve(m.palette)); });
  const GridSize grid = options.grid.value_or(m.patch_grid);
  const std::size_t classes = m.class_count;
  const GridSize size = m.image_size;

  PipelineResult result;
  result.record = base_record(m, options.manifest);
  SpatialCounts gt_counts(classes, grid, LabelSource::kGroundTruth);
  AggregateAccumulator gt_agg(classes, size.rows, size.cols);

  if (options.gt_only) {
    stage("posbias", [&] {
      for (std::size_t i = 0; i < m.images.size(); ++i) {
        const LabelMap gt = load_labels(m, i);
        gt_counts.add(gt);
        gt_agg.add_hard(gt);
      }
      result.gt_positions = global_nmi(gt_counts);
      write_json(positional_json(result.gt_positions, nullptr), options.out / "posbias_gt.json");
    });
    stage("aggregate", [&] { write_png(gt_agg.finalize(palette).to_image(), options.out / "aggregate_gt.png"); });
    result.record.provenance["mode"] = "gt-only";
    write_metrics(options.out, result);
    return result;
  }

  Codebook cb;
  if (options.codebook) {
    cb = stage("load", [&] { return read_codebook(*options.codebook); });
    result.record.provenance["codebook"] = options.codebook->string();
  } else {
    FitOptions fo{options.manifest, options.out, options.fit};
    cb = run_fit(fo);
    result.record.provenance["codebook"] = "inline";
    result.record.provenance["fit"] = options.fit.to_json();
  }
  if (cb.dim() != m.embed_dim) {
    throw StageError("segment", Error(ErrorKind::kShape, "codebook d=" + std::to_string(cb.dim()) +
                                                             " but manifest embed_dim=" + std::to_string(m.embed_dim)));
  }
  const std::size_t clusters = cb.k();
  result.record.provenance["k"] = clusters;
  result.record.provenance["seed"] = cb.config.seed;

  const CentroidIndex index(cb.centroids);
  Contingency table(clusters, classes);
  SpatialCounts pred_counts(clusters, grid, LabelSource::kPrediction);
  AggregateAccumulator pred_agg(clusters, size.rows, size.cols);
  const std::size_t exemplars = std::min(options.exemplars, m.images.size());
  std::vector<LabelMap> ex_pred, ex_gt;
  std::vector<std::optional<Image>> ex_img;

  ensure_dir(options.out / "predictions");
  nlohmann::json pred_doc{{"clusters", clusters}, {"images", nlohmann::json::array()}};
  stage("segment", [&] {
    segment_dataset(m, index, options.threads, options.soft_aggregate, options.soft_temperature,
                    [&](std::size_t i, SegmentedImage&& r) {
                      const LabelMap gt = load_labels(m, i);
                      table.accumulate(r.pred, gt);
                      pred_counts.add(r.pred);
                      gt_counts.add(gt);
                      gt_agg.add_hard(gt);
                      if (r.soft) {
                        pred_agg.add_soft(*r.soft);
                      } else {
                        pred_agg.add_hard(r.pred);
                      }
                      const fs::path rel = write_prediction(options.out, m.images[i].id, r.pred);
                      pred_doc["images"].push_back({{"id", m.images[i].id}, {"labels", rel.string()}});
                      if (i < exemplars) {
                        ex_img.push_back(m.images[i].image ? std::optional<Image>(image_from_tensor(load_image(m, i)))
                                                           : std::nullopt);
                        ex_pred.push_back(std::move(r.pred));
                        ex_gt.push_back(gt);
                      }
                    });
    write_json(pred_doc, options.out / "predictions.json");
  });
  spdlog::info("segmented {} images", m.images.size());

  result.match = stage("evaluate", [&] { return match_clusters(table); });
  write_json(result.match->to_json(), options.out / "match.json");
  result.record.miou = result.match->miou;

  stage("posbias", [&] {
    result.pred_positions = global_nmi(pred_counts);
    result.gt_positions = global_nmi(gt_counts);
    write_json(positional_json(*result.pred_positions, &result.match->mapping), options.out / "posbias_pred.json");
    write_json(positional_json(result.gt_positions, nullptr), options.out / "posbias_gt.json");
  });
  result.record.nmi = result.pred_positions->nmi;

  stage("aggregate", [&] {
    write_png(pred_agg.remap(result.match->mapping, classes).finalize(palette).to_image(),
              options.out / "aggregate_pred.png");
    write_png(gt_agg.finalize(palette).to_image(), options.out / "aggregate_gt.png");
  });

  stage("render", [&] {
    if (exemplars == 0) return;
    std::vector<PanelCell> cells;
    std::vector<std::string> captions;
    const bool with_images = std::all_of(ex_img.begin(), ex_img.end(), [](const auto& im) { return im.has_value(); });
    for (std::size_t e = 0; e < exemplars; ++e) {
      if (with_images) {
        cells.emplace_back(*ex_img[e]);
        captions.push_back(m.images[e].id);
      }
      cells.emplace_back(apply_mapping(ex_pred[e], result.match->mapping));
      captions.push_back(caption_for(m, "pred"));
      cells.emplace_back(ex_gt[e]);
      captions.push_back("gt");
    }
    const PanelLayout layout{exemplars, with_images ? 3u : 2u, true};
    write_png(render_panel(cells, palette, layout, captions), options.out / "panel.png");
  });

  if (m.has_attention()) {
    stage("locality", [&] {
      std::vector<double> mi(m.images.size());
      parallel_for(m.images.size(), options.threads, [&](std::size_t i) { mi[i] = image_attention_mi(m, i); });
      std::map<int, std::vector<double>> by_layer{{m.layer, mi}};
      const auto profile = layer_profile(by_layer);
      result.record.ikq = profile.front().mean_mi;
      nlohmann::json doc = layer_profile_json(profile);
      doc["percentile"] = options.percentile;
      write_json(doc, options.out / "locality.json");
      write_png(attention_png(m, 0, options.percentile), options.out / "attention_binarized.png");
    });
  }

  if (m.keypoints) {
    stage("correspond", [&] {
      const auto pairs = read_keypoint_pairs(m.resolve(*m.keypoints));
      result.pck = correspondence(m, pairs, options.alpha, 0, options.out);
      write_json(result.pck->to_json(), options.out / "pck.json");
    });
    result.record.pck = result.pck->pck;
  }

  stage("report", [&] {
    result.record.validate();
    write_metrics(options.out, result);
  });
  return result;
}

MatchResult run_evaluate(const fs::path& manifest, const fs::path& predictions, const fs::path& out) {
  const DatasetManifest m = load_valid_manifest(manifest);
  const PredictionSet set = stage("load", [&] { return read_predictions(predictions); });
  ensure_dir(out);
  MatchResult match = stage("evaluate", [&] { return match_clusters(contingency_from_predictions(m, set)); });
  write_json(match.to_json(), out / "match.json");
  return match;
}

nlohmann::json run_posbias(const fs::path& manifest, const std::optional<fs::path>& predictions,
                           const std::optional<GridSize>& grid_override, const fs::path& out) {
  const DatasetManifest m = load_valid_manifest(manifest);
  ensure_dir(out);
  const GridSize grid = grid_override.value_or(m.patch_grid);
  nlohmann::json doc;
  stage("posbias", [&] {
    SpatialCounts gt(m.class_count, grid, LabelSource::kGroundTruth);
    for (std::size_t i = 0; i < m.images.size(); ++i) gt.add(load_labels(m, i));
    doc["gt"] = global_nmi(gt).to_json();
    write_json(doc["gt"], out / "posbias_gt.json");
    if (predictions) {
      const PredictionSet set = read_predictions(*predictions);
      check_predictions_match(m, set);
      SpatialCounts pred(set.clusters, grid, LabelSource::kPrediction);
      for (std::size_t i = 0; i < set.files.size(); ++i) pred.add(load_prediction(set, i));
      doc["pred"] = global_nmi(pred).to_json();
      write_json(doc["pred"], out / "posbias_pred.json");
    }
  });
  return doc;
}

nlohmann::json run_locality(const std::vector<fs::path>& manifests, double percentile, const fs::path& out,
                            unsigned threads) {
  if (manifests.empty()) fail(ErrorKind::kInput, "locality needs at least one manifest");
  if (!(percentile > 0.0 && percentile < 100.0)) fail(ErrorKind::kInput, "percentile must lie in (0, 100)");
  ensure_dir(out);
  std::map<int, std::vector<double>> by_layer;
  nlohmann::json models = nlohmann::json::array();
  for (const auto& path : manifests) {
    const DatasetManifest m = load_valid_manifest(path);
    if (!m.has_attention()) {
      throw StageError("locality", Error(ErrorKind::kInput, path.string() + " lists no attention files"));
    }
    stage("locality", [&] {
      std::vector<double> mi(m.images.size());
      parallel_for(m.images.size(), threads, [&](std::size_t i) { mi[i] = image_attention_mi(m, i); });
      auto& slot = by_layer[m.layer];
      slot.insert(slot.end(), mi.begin(), mi.end());
      write_png(attention_png(m, 0, percentile), out / ("attention_L" + std::to_string(m.layer) + ".png"));
    });
    models.push_back({{"model", m.model_id}, {"kind", to_string(m.embedding_kind)}, {"layer", m.layer}});
  }
  std::vector<int> expected;
  for (int l = by_layer.begin()->first; l <= by_layer.rbegin()->first; ++l) expected.push_back(l);
  nlohmann::json doc = layer_profile_json(layer_profile(by_layer, expected));
  doc["percentile"] = percentile;
  doc["inputs"] = models;
  write_json(doc, out / "locality.json");
  return doc;
}

PckResult run_correspond(const fs::path& manifest, const std::optional<fs::path>& pairs_path, double alpha,
                         std::size_t heatmaps, const fs::path& out) {
  const DatasetManifest m = load_valid_manifest(manifest);
  ensure_dir(out);
  return stage("correspond", [&] {
    fs::path p;
    if (pairs_path) {
      p = *pairs_path;
    } else if (m.keypoints) {
      p = m.resolve(*m.keypoints);
    } else {
      fail(ErrorKind::kInput, "no keypoint pairs: pass --pairs or set keypoints in the manifest");
    }
    const PckResult r = correspondence(m, read_keypoint_pairs(p), alpha, heatmaps, out);
    write_json(r.to_json(), out / "pck.json");
    return r;
  });
}

void run_aggregate(const fs::path& manifest, const fs::path& predictions, const std::optional<fs::path>& codebook,
                   bool soft, double temperature, const fs::path& out) {
  const DatasetManifest m = load_valid_manifest(manifest);
  const PredictionSet set = stage("load", [&] { return read_predictions(predictions); });
  const Palette palette = stage("load", [&] { return read_palette(m.resolve(m.palette)); });
  ensure_dir(out);
  const MatchResult match = stage("evaluate", [&] { return match_clusters(contingency_from_predictions(m, set)); });
  stage("aggregate", [&] {
    AggregateAccumulator pred(set.clusters, m.image_size.rows, m.image_size.cols);
    AggregateAccumulator gt(m.class_count, m.image_size.rows, m.image_size.cols);
    std::optional<CentroidIndex> index;
    if (soft) {
      if (!codebook) fail(ErrorKind::kInput, "--soft-aggregate needs --codebook");
      const Codebook cb = read_codebook(*codebook);
      if (cb.k() != set.clusters) fail(ErrorKind::kShape, "codebook k differs from prediction clusters");
      index.emplace(cb.centroids);
    }
    for (std::size_t i = 0; i < m.images.size(); ++i) {
      if (index) {
        pred.add_soft(soft_assignments(load_embeddings(m, i), m.patch_grid, m.image_size, *index, temperature));
      } else {
        pred.add_hard(load_prediction(set, i));
      }
      gt.add_hard(load_labels(m, i));
    }
    write_png(pred.remap(match.mapping, m.class_count).finalize(palette).to_image(), out / "aggregate_pred.png");
    write_png(gt.finalize(palette).to_image(), out / "aggregate_gt.png");
  });
}

void run_render(const fs::path& manifest, const fs::path& predictions, std::size_t exemplars, const fs::path& out) {
  const DatasetManifest m = load_valid_manifest(manifest);
  const PredictionSet set = stage("load", [&] { return read_predictions(predictions); });
  const Palette palette = stage("load", [&] { return read_palette(m.resolve(m.palette)); });
  ensure_dir(out);
  const MatchResult match = stage("evaluate", [&] { return match_clusters(contingency_from_predictions(m, set)); });
  stage("render", [&] {
    const std::size_t n = std::min(exemplars, m.images.size());
    if (n == 0) fail(ErrorKind::kInput, "nothing to render");
    bool with_images = true;
    for (std::size_t i = 0; i < n; ++i) with_images = with_images && m.images[i].image.has_value();
    std::vector<PanelCell> cells;
    std::vector<std::string> captions;
    for (std::size_t i = 0; i < n; ++i) {
      if (with_images) {
        cells.emplace_back(image_from_tensor(load_image(m, i)));
        captions.push_back(m.images[i].id);
      }
      cells.emplace_back(apply_mapping(load_prediction(set, i), match.mapping));
      captions.push_back(caption_for(m, "pred"));
      cells.emplace_back(load_labels(m, i));
      captions.push_back("gt");
    }
    const PanelLayout layout{n, with_images ? 3u : 2u, true};
    write_png(render_panel(cells, palette, layout, captions), out / "panel.png");
  });
}

SweepResult run_sweep(const SweepOptions& options) {
  if (options.manifests.size() < 2) fail(ErrorKind::kInput, "sweep needs at least two manifests");
  const fs::path out = options.pipeline.out;
  ensure_dir(out);
  SweepResult result;
  for (std::size_t i = 0; i < options.manifests.size(); ++i) {
    PipelineOptions po = options.pipeline;
    po.manifest = options.manifests[i];
    po.out = out / ("run_" + std::to_string(i));
    try {
      spdlog::info("sweep run {} of {}: {}", i + 1, options.manifests.size(), po.manifest.string());
      result.records.push_back(run_pipeline(po).record);
    } catch (const Error& e) {
      const auto* se = dynamic_cast<const StageError*>(&e);
      spdlog::error("sweep run {} failed: {}", i, e.what());
      result.gaps.push_back({{"manifest", po.manifest.string()},
                             {"stage", se ? se->stage() : std::string("unknown")},
                             {"exit_code", exit_code_for(e.kind())},
                             {"error", e.what()}});
    }
  }
  result.summary = sweep_summary(result.records);

  auto correlation_or_gap = [](const std::vector<double>& x, const std::vector<double>& y, bool log_x) {
    if (x.size() < 3) {
      return nlohmann::json{{"n", x.size()}, {"undefined", true}, {"reason", "fewer than 3 usable records"},
                            {"log_x", log_x}};
    }
    return correlate(x, y, log_x).to_json();
  };
  std::vector<double> miou, nmi, ikq, nmi_kq;
  for (const auto& r : result.records) {
    if (r.miou && r.nmi && *r.miou > 0.0) {
      miou.push_back(*r.miou);
      nmi.push_back(*r.nmi);
    }
    if ((r.kind == "key" || r.kind == "query") && r.ikq && r.nmi) {
      ikq.push_back(*r.ikq);
      nmi_kq.push_back(*r.nmi);
    }
  }
  result.correlations = {
      {"nmi_vs_log_miou", correlation_or_gap(miou, nmi, true)},
      {"nmi_vs_ikq_keys_queries", correlation_or_gap(ikq, nmi_kq, false)},
  };

  nlohmann::json summary = result.summary.to_json();
  summary["gaps"] = result.gaps;
  summary["correlations"] = result.correlations;
  write_json(summary, out / "sweep_summary.json");
  write_text(metrics_csv(result.records), out / "sweep_table.csv");
  write_json(result.correlations, out / "correlations.json");
  return result;
}

}  // namespace repprobe::app
