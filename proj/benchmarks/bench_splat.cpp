#include <benchmark/benchmark.h>

#include <random>

#include "panoscene/splat.hpp"

using namespace panoscene;

namespace {

GaussianSet make_scene(int count) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> xy(-1.0, 1.0);
  std::uniform_real_distribution<double> z(0.5, 4.0);
  std::uniform_real_distribution<double> s(0.01, 0.05);
  std::uniform_real_distribution<float> c(0.f, 1.f);
  GaussianSet set;
  for (int i = 0; i < count; i++) {
    const double sigma = s(rng);
    set.gaussians.emplace_back(Eigen::Vector3d(xy(rng), xy(rng), z(rng)),
                               Eigen::Matrix3d::Identity() * (sigma * sigma), 0.8,
                               Eigen::Vector3f(c(rng), c(rng), c(rng)));
  }
  return set;
}

void BM_RenderGaussians(benchmark::State& state) {
  const GaussianSet set = make_scene(int(state.range(0)));
  const CameraIntrinsics intr = CameraIntrinsics::from_fov(60.0, 256, 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(render(set, Pose(), intr));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PointcloudToGaussians(benchmark::State& state) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  PointCloud cloud;
  for (int i = 0; i < state.range(0); i++) {
    cloud.append({coord(rng), coord(rng), coord(rng)}, {0.5f, 0.5f, 0.5f},
                 {SourceKind::kPanorama, -1});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(pointcloud_to_gaussians(cloud));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_RenderGaussians)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PointcloudToGaussians)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
