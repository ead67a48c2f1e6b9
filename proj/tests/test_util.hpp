#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/image.hpp"
#include "panoscene/splat.hpp"

namespace panoscene::test {

inline Eigen::Matrix3d random_rotation(std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::Vector3d axis;
  do {
    axis = {unit(rng), unit(rng), unit(rng)};
  } while (axis.norm() < 1e-3);
  axis.normalize();
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  return Eigen::AngleAxisd(angle(rng), axis).toRotationMatrix();
}

/// Smooth low-frequency color field on the unit sphere; band-limited enough
/// that bilinear resampling error stays far below 1/255.
inline Eigen::Vector3f sphere_color(const Eigen::Vector3d& dir) {
  const auto clamp01 = [](double v) { return float(std::clamp(v, 0.0, 1.0)); };
  return {clamp01(0.5 + 0.35 * std::sin(3.0 * dir.x() + 1.1) + 0.15 * std::cos(2.0 * dir.y())),
          clamp01(0.5 + 0.35 * std::sin(2.5 * dir.y() - 0.4) + 0.15 * std::cos(3.0 * dir.z())),
          clamp01(0.5 + 0.35 * std::sin(2.0 * dir.z() + 2.0) + 0.15 * std::cos(2.5 * dir.x()))};
}

/// Direct analytic render of the colored unit-sphere room from its center.
inline PerspectiveImage analytic_sphere_view(const Pose& pose, const CameraIntrinsics& intr) {
  PerspectiveImage out;
  out.image = Image(intr.width, intr.height);
  out.intrinsics = intr;
  out.pose = pose;
  for (int y = 0; y < intr.height; y++) {
    for (int x = 0; x < intr.width; x++) {
      const Eigen::Vector3d ray((x + 0.5 - intr.cx) / intr.fx, (y + 0.5 - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3f c = sphere_color(pose.direction_to_world(ray.normalized()));
      float* p = out.image.px(x, y);
      p[0] = c.x();
      p[1] = c.y();
      p[2] = c.z();
    }
  }
  return out;
}

inline double psnr(const Image& a, const Image& b) {
  double mse = 0.0;
  for (size_t i = 0; i < a.pixels.size(); i++) {
    const double d = double(a.pixels[i]) - double(b.pixels[i]);
    mse += d * d;
  }
  mse /= double(a.pixels.size());
  return 10.0 * std::log10(1.0 / mse);
}

/// Reference renderer: per pixel, every Gaussian, no cutoff, no tiling.
/// Implements the same one-sample-per-Gaussian reading independently of the
/// production path.
inline RenderResult brute_force_render(const GaussianSet& set, const Pose& pose,
                                       const CameraIntrinsics& intr) {
  RenderResult out;
  out.image.image = Image(intr.width, intr.height, 0.f, 0.f, 0.f, true);
  out.image.intrinsics = intr;
  out.image.pose = pose;
  out.depth = DepthMap(intr.width, intr.height, 0.0, false);

  struct Hit {
    double t;
    int index;
    double sigma;
  };

  for (int y = 0; y < intr.height; y++) {
    for (int x = 0; x < intr.width; x++) {
      Eigen::Vector3d d((x + 0.5 - intr.cx) / intr.fx, (y + 0.5 - intr.cy) / intr.fy, 1.0);
      d.normalize();
      const Eigen::Vector3d d_world = pose.rotation().transpose() * d;
      const Eigen::Vector3d origin = pose.position();

      std::vector<Hit> hits;
      for (int i = 0; i < int(set.gaussians.size()); i++) {
        const Gaussian3D& g = set.gaussians[i];
        const double t = d_world.dot(g.mu() - origin);
        if (t <= 0.0) {
          continue;
        }
        const Eigen::Vector3d closest = origin + t * d_world;
        const double value = eval_gaussian(g, closest);
        hits.push_back({t, i, g.alpha() * value});
      }
      std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.index < b.index;
      });

      double rgb[3] = {0, 0, 0};
      double depth_acc = 0.0, weight_acc = 0.0, trans = 1.0;
      for (const Hit& hit : hits) {
        const double w = hit.sigma * trans;
        const Eigen::Vector3f& c = set.gaussians[hit.index].color();
        rgb[0] += w * c.x();
        rgb[1] += w * c.y();
        rgb[2] += w * c.z();
        depth_acc += w * hit.t;
        weight_acc += w;
        trans *= 1.0 - hit.sigma;
      }
      float* p = out.image.image.px(x, y);
      p[0] = float(rgb[0]);
      p[1] = float(rgb[1]);
      p[2] = float(rgb[2]);
      if (weight_acc >= 0.01) {
        out.depth.set(x, y, depth_acc / weight_acc);
        out.depth.set_valid(x, y, true);
      }
    }
  }
  return out;
}

}  // namespace panoscene::test
