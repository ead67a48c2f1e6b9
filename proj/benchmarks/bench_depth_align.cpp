#include <benchmark/benchmark.h>

#include <random>

#include "panoscene/depth_align.hpp"

using namespace panoscene;

namespace {

void BM_SolveDisparityAlignment(benchmark::State& state) {
  const int res = int(state.range(0));
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> dist(0.5, 5.0);
  DepthMap d_p(res, res);
  DepthMap d(res, res);
  for (size_t i = 0; i < d_p.values.size(); i++) {
    d_p.values[i] = dist(rng);
    d.values[i] = 1.0 / (1.5 / d_p.values[i] + 0.1);
  }
  const ViewMask mask(res, res, MaskKind::kOverlap, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_disparity_alignment(d, d_p, mask));
  }
  state.SetItemsProcessed(state.iterations() * res * res);
}

void BM_SmoothMaskEdges(benchmark::State& state) {
  const int res = int(state.range(0));
  DepthMap d(res, res, 2.0);
  ViewMask mask(res, res, MaskKind::kOverlap);
  for (int y = 0; y < res; y++) {
    for (int x = 0; x < res / 2; x++) {
      mask.set(x, y, true);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(smooth_mask_edges(d, mask));
  }
}

}  // namespace

BENCHMARK(BM_SolveDisparityAlignment)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SmoothMaskEdges)->Arg(512)->Unit(benchmark::kMillisecond);
