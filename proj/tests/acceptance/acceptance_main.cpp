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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and must not be loosened.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "oracles.hpp"
#include "repprobe/codebook.hpp"
#include "repprobe/correspond.hpp"
#include "repprobe/densify.hpp"
#include "repprobe/evalseg.hpp"
#include "repprobe/locality.hpp"
#include "repprobe/posbias.hpp"
#include "repprobe/report.hpp"
#include "synthetic.hpp"

namespace {

using namespace repprobe;
namespace t = repprobe::testing;
namespace oracle = repprobe::testing::oracle;

constexpr double kPipelineMiou = 0.95;
constexpr double kPipelineNmiTolerance = 0.02;
constexpr double kPipelineSeconds = 60.0;
constexpr double kMiTolerance = 1e-10;
constexpr double kClosedFormTolerance = 1e-9;
constexpr double kUniformAttentionTolerance = 1e-12;
constexpr double kIdentityAttentionTolerance = 1e-9;
constexpr double kAttentionOracleTolerance = 1e-12;
constexpr double kGradientRelativeError = 1e-4;
constexpr double kBilinearTolerance = 1e-12;
constexpr double kCorrelationTolerance = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s  %-28s %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str());
  std::fflush(stdout);
  if (!out.pass) ++failures;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

app::PipelineOptions pipeline_options(const std::filesystem::path& manifest, const std::filesystem::path& out) {
  app::PipelineOptions po;
  po.manifest = manifest;
  po.out = out;
  po.fit.k = 4;
  po.threads = 1;
  return po;
}

Outcome synthetic_pipeline() {
  t::TempDir dir("accept-pipeline");
  t::SyntheticSpec spec;  // 200 images, 8x8 grid, d=16, 4 quadrant classes
  const auto manifest = t::write_synthetic_dataset(spec, dir / "data");
  const double expected_nmi = t::layout_nmi(spec);

  const auto start = std::chrono::steady_clock::now();
  const auto result = app::run_pipeline(pipeline_options(manifest, dir / "out"));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const double miou = result.match->miou;
  const double nmi = result.pred_positions->nmi.value_or(-1.0);
  Outcome o;
  o.pass = miou >= kPipelineMiou && std::abs(nmi - expected_nmi) <= kPipelineNmiTolerance &&
           seconds < kPipelineSeconds;
  o.detail = "miou=" + fmt(miou) + " nmi=" + fmt(nmi) + " expected_nmi=" + fmt(expected_nmi) +
             " seconds=" + fmt(seconds);
  return o;
}

Outcome hungarian_oracle() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint64_t> count(0, 1000);
  std::size_t mismatches = 0, cases = 0;
  auto run = [&](std::size_t n, std::size_t reps) {
    for (std::size_t r = 0; r < reps; ++r) {
      std::vector<std::uint64_t> counts(n * n);
      for (auto& c : counts) c = count(rng);
      const MatchResult m = hungarian_match(Contingency(n, n, counts));
      if (m.matched_tp != oracle::brute_force_max_tp(counts, n)) ++mismatches;
      ++cases;
    }
  };
  run(5, 200);
  run(6, 50);
  return {mismatches == 0, std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

Outcome mi_oracle() {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> side(1, 8), ncls(1, 10);
  std::uniform_int_distribution<std::uint64_t> count(0, 50);
  std::bernoulli_distribution zero(0.3);
  double worst = 0.0;
  bool negative = false, merge_increase = false, degenerate_mismatch = false;
  for (int trial = 0; trial < 100; ++trial) {
    const GridSize grid{side(rng), side(rng)};
    const std::size_t classes = ncls(rng);
    SpatialCounts sc(classes, grid);
    oracle::Mat joint(classes, oracle::Vec(grid.cells()));
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t p = 0; p < grid.cells(); ++p) {
        const std::uint64_t v = zero(rng) ? 0 : count(rng);
        sc.at(c, p) = v;
        joint[c][p] = static_cast<double>(v);
      }
    }
    sc.at(0, 0) += 1;  // never empty
    joint[0][0] += 1.0;
    sc.recount();

    const auto ref = oracle::naive_mi(joint);
    const auto rep = global_nmi(sc);
    for (std::size_t c = 0; c < classes; ++c) {
      const double ic = class_mi(sc, c).value;
      negative = negative || ic < 0.0;
      worst = std::max(worst, std::abs(ic - ref.per_class[c]));
    }
    worst = std::max({worst, std::abs(rep.global_mi - ref.mi), std::abs(rep.entropy - ref.entropy)});
    if (rep.nmi.has_value() != !std::isnan(ref.nmi)) degenerate_mismatch = true;
    if (rep.nmi) worst = std::max(worst, std::abs(*rep.nmi - ref.nmi));

    // Merge two cells into one and check I does not grow.
    if (grid.cells() >= 2) {
      std::uniform_int_distribution<std::size_t> pick(0, grid.cells() - 1);
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      while (b == a) b = pick(rng);
      SpatialCounts merged(classes, GridSize{1, grid.cells() - 1});
      for (std::size_t c = 0; c < classes; ++c) {
        std::size_t out = 0;
        for (std::size_t p = 0; p < grid.cells(); ++p) {
          if (p == b) continue;
          merged.at(c, out++) = sc.at(c, p) + (p == a ? sc.at(c, b) : 0);
        }
      }
      merged.recount();
      if (global_nmi(merged).global_mi > rep.global_mi + 1e-12) merge_increase = true;
    }
  }
  Outcome o;
  o.pass = worst <= kMiTolerance && !negative && !merge_increase && !degenerate_mismatch;
  o.detail = "max_abs_err=" + fmt(worst) + (negative ? " negative_Ic" : "") +
             (merge_increase ? " merge_increased_I" : "") + (degenerate_mismatch ? " degenerate_mismatch" : "");
  return o;
}

Outcome closed_form_mi() {
  // G uniform cells of T pixels; class 0 fills `a` pixels of cell 0 only.
  const std::size_t side = 4, per_cell = 1000, a = 250;
  const GridSize grid{side, side};
  const std::size_t cells = grid.cells();
  SpatialCounts sc(3, grid);
  for (std::size_t p = 0; p < cells; ++p) {
    if (p == 0) {
      sc.at(0, p) = a;
      sc.at(1, p) = per_cell - a;
    } else {
      sc.at(1, p) = per_cell / 2;
      sc.at(2, p) = per_cell / 2;
    }
  }
  sc.recount();
  const double q = static_cast<double>(a) / static_cast<double>(cells * per_cell);
  const double err_ic = std::abs(class_mi(sc, 0).value - q * std::log(static_cast<double>(cells)));

  // Each cell always holds one class.
  SpatialCounts det(4, grid);
  for (std::size_t p = 0; p < cells; ++p) det.at(p % 4, p) = 37;
  det.recount();
  const auto rep = global_nmi(det);
  const double err_nmi = rep.nmi ? std::abs(*rep.nmi - 1.0) : 1.0;
  return {err_ic <= kClosedFormTolerance && err_nmi <= kClosedFormTolerance,
          "Ic_err=" + fmt(err_ic) + " nmi_err=" + fmt(err_nmi)};
}

AttentionRecord record_of(const oracle::Mat& a) {
  AttentionRecord r;
  r.matrix = MatrixD(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) r.matrix(i, j) = a[i][j];
  }
  return r;
}

Outcome attention_bounds() {
  const std::size_t n = 196;
  const double uniform = attention_mi(record_of(oracle::Mat(n, oracle::Vec(n, 1.0 / n))));
  oracle::Mat eye(n, oracle::Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) eye[i][i] = 1.0;
  const double identity_err = std::abs(attention_mi(record_of(eye)) - std::log(static_cast<double>(n)));

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    oracle::Mat a(8, oracle::Vec(8));
    for (auto& row : a) {
      double s = 0.0;
      for (auto& v : row) s += (v = u(rng));
      for (auto& v : row) v /= s;
    }
    worst = std::max(worst, std::abs(attention_mi(record_of(a)) - oracle::naive_attention_mi(a)));
  }
  return {std::abs(uniform) <= kUniformAttentionTolerance && identity_err <= kIdentityAttentionTolerance &&
              worst <= kAttentionOracleTolerance,
          "uniform=" + fmt(uniform) + " identity_err=" + fmt(identity_err) + " oracle_err=" + fmt(worst)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> dims(2, 8), ks(1, 4), bs(1, 16);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int done = 0;
  while (done < 50) {
    const std::size_t d = dims(rng), k = ks(rng), b = bs(rng);
    MatrixD cent(k, d), batch(b, d);
    for (auto& v : cent.values()) v = normal(rng);
    for (auto& v : batch.values()) v = normal(rng);
    // Reject instances with a near tie in any row's best similarity.
    bool tie = false;
    for (std::size_t i = 0; i < b && !tie; ++i) {
      std::vector<double> sims;
      for (std::size_t c = 0; c < k; ++c) {
        sims.push_back(oracle::cosine({batch.row(i).begin(), batch.row(i).end()},
                                      {cent.row(c).begin(), cent.row(c).end()}));
      }
      std::sort(sims.rbegin(), sims.rend());
      tie = sims.size() > 1 && sims[0] - sims[1] < 1e-3;
    }
    if (tie) continue;

    const MatrixD g = cosine_kmeans_loss(batch, cent, true).gradient;
    const double h = 1e-6;
    double diff = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < cent.size(); ++i) {
      MatrixD plus = cent, minus = cent;
      plus.values()[i] += h;
      minus.values()[i] -= h;
      const double fd = (cosine_kmeans_loss(batch, plus, false).loss - cosine_kmeans_loss(batch, minus, false).loss) /
                        (2.0 * h);
      diff += (g.values()[i] - fd) * (g.values()[i] - fd);
      na += g.values()[i] * g.values()[i];
      nf += fd * fd;
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / scale);
    ++done;
  }
  return {worst < kGradientRelativeError, "max_rel_err=" + fmt(worst) + " over 50 instances"};
}

Outcome bilinear() {
  double worst = 0.0;
  // Constant field.
  MatrixF constant(3 * 5, 2, 7.5f);
  const auto up = upsample_bilinear(constant, {3, 5}, {11, 17});
  for (float v : up.features.values()) worst = std::max(worst, std::abs(v - 7.5));
  // Identity size.
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  MatrixF random(4 * 6, 3);
  for (auto& v : random.values()) v = u(rng);
  const bool identity = upsample_bilinear(random, {4, 6}, {4, 6}).features == random;
  // 2x2 -> 4x4.
  MatrixF two(4, 1, std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});
  const auto four = upsample_bilinear(two, {2, 2}, {4, 4});
  const double expected[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) worst = std::max(worst, std::abs(four.at(r, c)[0] - expected[c]));
  }
  // Convexity on random grids.
  std::uniform_int_distribution<std::size_t> side(1, 8), scale(1, 5);
  bool convex = true;
  for (int trial = 0; trial < 100; ++trial) {
    const GridSize g{side(rng), side(rng)};
    const GridSize target{g.rows * scale(rng), g.cols * scale(rng) + trial % 3};
    MatrixF p(g.cells(), 2);
    for (auto& v : p.values()) v = u(rng);
    const auto dense = upsample_bilinear(p, g, target);
    for (std::size_t ch = 0; ch < 2; ++ch) {
      float lo = p(0, ch), hi = p(0, ch);
      for (std::size_t i = 0; i < p.rows(); ++i) {
        lo = std::min(lo, p(i, ch));
        hi = std::max(hi, p(i, ch));
      }
      for (std::size_t i = 0; i < dense.features.rows(); ++i) {
        convex = convex && dense.features(i, ch) >= lo && dense.features(i, ch) <= hi;
      }
    }
  }
  return {worst <= kBilinearTolerance && identity && convex,
          "max_err=" + fmt(worst) + (identity ? "" : " identity_copy_differs") + (convex ? "" : " convexity_violated")};
}

PredictedKeypoint keypoint(int dx, double size) {
  PredictedKeypoint p;
  p.pair.target = {50, 50};
  p.pair.target_box = {0.0, 0.0, size, size / 2};
  p.pair.category = "c";
  p.prediction = {50 + dx, 50};
  return p;
}

Outcome pck_criteria() {
  std::vector<PredictedKeypoint> exact, half, none;
  for (int i = 0; i < 10; ++i) {
    exact.push_back(keypoint(0, 100.0));
    half.push_back(keypoint(i < 5 ? 0 : 11, 100.0));  // threshold 10 px
    none.push_back(keypoint(20, 100.0));
  }
  const double a = pck(exact).pck, b = pck(half).pck, c = pck(none).pck;
  std::vector<PredictedKeypoint> spread;
  for (int i = 0; i < 40; ++i) spread.push_back(keypoint(i, 100.0));
  bool monotone = true;
  double prev = -1.0;
  for (double alpha = 0.0; alpha <= 0.5 + 1e-12; alpha += 0.01) {
    const double v = pck(spread, alpha).pck;
    monotone = monotone && v >= prev;
    prev = v;
  }
  return {a == 1.0 && b == 0.5 && c == 0.0 && monotone,
          "pck=" + fmt(a) + "/" + fmt(b) + "/" + fmt(c) + (monotone ? " monotone" : " not_monotone")};
}

Outcome determinism() {
  t::TempDir dir("accept-determinism");
  t::SyntheticSpec spec;
  spec.images = 48;
  spec.rgb = true;
  spec.attention = true;
  spec.keypoints = true;
  const auto manifest = t::write_synthetic_dataset(spec, dir / "data");
  auto po = pipeline_options(manifest, dir / "a");
  po.fit.steps = 300;
  app::run_pipeline(po);
  po.out = dir / "b";
  app::run_pipeline(po);

  std::vector<std::string> files = {"metrics.json", "metrics.csv", "match.json", "posbias_pred.json",
                                    "posbias_gt.json", "aggregate_pred.png", "aggregate_gt.png", "panel.png",
                                    "attention_binarized.png", "pck.json", "codebook.rpt"};
  std::string differing;
  for (const auto& f : files) {
    const auto x = read_bytes(dir / "a" / f), y = read_bytes(dir / "b" / f);
    if (x.empty() || x != y) differing += " " + f;
  }
  return {differing.empty(), differing.empty() ? std::to_string(files.size()) + " artifacts identical"
                                               : "differing:" + differing};
}

Outcome correlation() {
  const std::vector<double> x = {1.2, 3.4, 2.2, 5.0, 4.1, 0.7, 3.3, 2.9, 4.8, 1.9};
  const std::vector<double> y = {2.0, 2.9, 2.5, 6.1, 3.9, 1.1, 3.3, 3.3, 5.2, 1.4};
  const Correlation c = correlate(x, y);
  const double ep = std::abs(*c.pearson - oracle::pearson_textbook(x, y));
  const double es = std::abs(*c.spearman - oracle::spearman_textbook(x, y));

  std::vector<double> same(x), neg;
  for (double v : x) neg.push_back(-2.0 * v);
  const Correlation id = correlate(x, same), anti = correlate(x, neg);
  const double e_id = std::max(std::abs(*id.pearson - 1.0), std::abs(*id.spearman - 1.0));
  const double e_anti = std::abs(*anti.pearson + 1.0);
  return {ep <= kCorrelationTolerance && es <= kCorrelationTolerance && e_id <= kCorrelationTolerance &&
              e_anti <= kCorrelationTolerance,
          "pearson_err=" + fmt(ep) + " spearman_err=" + fmt(es) + " y=x_err=" + fmt(e_id) +
              " y=-2x_err=" + fmt(e_anti)};
}

}  // namespace

int main() {
  report("synthetic_separable_pipeline", synthetic_pipeline);
  report("hungarian_oracle", hungarian_oracle);
  report("mi_oracle", mi_oracle);
  report("closed_form_mi", closed_form_mi);
  report("attention_mi_bounds", attention_bounds);
  report("gradient_check", gradient_check);
  report("bilinear", bilinear);
  report("pck", pck_criteria);
  report("determinism", determinism);
  report("correlation", correlation);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
