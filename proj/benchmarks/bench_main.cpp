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

#include <random>

#include <benchmark/benchmark.h>

#include "repprobe/codebook.hpp"
#include "repprobe/densify.hpp"
#include "repprobe/evalseg.hpp"
#include "repprobe/locality.hpp"
#include "repprobe/posbias.hpp"

namespace {

using namespace repprobe;

MatrixF gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  MatrixF m(rows, cols);
  for (auto& v : m.values()) v = n(rng);
  return m;
}

Codebook codebook(std::size_t k, std::size_t d) {
  Codebook cb;
  cb.centroids = gaussian(k, d, 2);
  return cb;
}

void BM_Assign(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixF features = gaussian(n, 768, 1);
  const Codebook cb = codebook(27, 768);
  for (auto _ : state) benchmark::DoNotOptimize(assign(features, cb));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Assign)->Arg(196)->Arg(4096);

void BM_SegmentPatches(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const MatrixF patches = gaussian(14 * 14, 384, 3);
  const Codebook cb = codebook(27, 384);
  const CentroidIndex index(cb.centroids);
  for (auto _ : state) benchmark::DoNotOptimize(segment_patches(patches, {14, 14}, {side, side}, index));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_SegmentPatches)->Arg(224)->Arg(448);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::vector<std::uint64_t> counts(n * n);
  for (auto& c : counts) c = rng() % 100000;
  const Contingency table(n, n, counts);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_match(table));
}
BENCHMARK(BM_Hungarian)->Arg(27)->Arg(150);

void BM_GlobalNmi(benchmark::State& state) {
  std::mt19937_64 rng(5);
  SpatialCounts sc(27, {14, 14});
  for (std::size_t c = 0; c < 27; ++c) {
    for (std::size_t p = 0; p < 196; ++p) sc.at(c, p) = rng() % 1000;
  }
  sc.recount();
  for (auto _ : state) benchmark::DoNotOptimize(global_nmi(sc));
}
BENCHMARK(BM_GlobalNmi);

void BM_AttentionMi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AttentionRecord r;
  r.matrix = MatrixD(n, n);
  for (std::size_t q = 0; q < n; ++q) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += (r.matrix(q, k) = u(rng));
    for (std::size_t k = 0; k < n; ++k) r.matrix(q, k) /= s;
  }
  for (auto _ : state) benchmark::DoNotOptimize(attention_mi(r));
}
BENCHMARK(BM_AttentionMi)->Arg(196)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
