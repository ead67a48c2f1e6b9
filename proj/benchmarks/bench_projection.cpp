#include <benchmark/benchmark.h>

#include "panoscene/projection.hpp"

using namespace panoscene;

namespace {

void BM_WarpRotate(benchmark::State& state) {
  const int res = int(state.range(0));
  PerspectiveImage src;
  src.intrinsics = CameraIntrinsics::from_fov(100.0, res, res);
  src.image = Image(res, res, 0.5f, 0.25f, 0.75f);
  const Eigen::Matrix3d yaw =
      Eigen::AngleAxisd(0.8, Eigen::Vector3d(0, -1, 0)).toRotationMatrix();
  for (auto _ : state) {
    benchmark::DoNotOptimize(warp_rotate(src, yaw));
  }
  state.SetItemsProcessed(state.iterations() * res * res);
}

void BM_PerspectiveToEquirect(benchmark::State& state) {
  const CameraSet set =
      build_base_cameras(int(state.range(0)), 60.0, 128, Eigen::Vector3d::Zero());
  std::vector<PerspectiveImage> views;
  for (const Camera& cam : set.base) {
    PerspectiveImage v;
    v.intrinsics = cam.intrinsics;
    v.pose = cam.pose;
    v.image = Image(128, 128, 0.5f, 0.5f, 0.5f);
    views.push_back(v);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(perspective_to_equirect(views, 512));
  }
}

}  // namespace

BENCHMARK(BM_WarpRotate)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PerspectiveToEquirect)->Arg(8)->Arg(40)->Unit(benchmark::kMillisecond);
