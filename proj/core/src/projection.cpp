#include "panoscene/projection.hpp"

#include <cmath>
#include <numbers>

#include "panoscene/errors.hpp"
#include "panoscene/json_writer.hpp"
#include "panoscene/parallel.hpp"

namespace panoscene {

namespace {

constexpr double kPi = std::numbers::pi;

// Bilinear taps land exactly on integers after pure-rotation round trips up
// to floating error; snapping keeps those identities bit-exact.
constexpr double kSnapEps = 1e-9;

double snap_index(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < kSnapEps ? r : x;
}

struct TapWeights {
  int x0, x1, y0, y1;
  double wx1, wy1;  // weight of the x1/y1 taps
};

TapWeights clamp_taps(double ix, double iy, int width, int height) {
  ix = snap_index(ix);
  iy = snap_index(iy);
  const double fx = std::floor(ix);
  const double fy = std::floor(iy);
  TapWeights t;
  t.wx1 = ix - fx;
  t.wy1 = iy - fy;
  t.x0 = std::clamp(int(fx), 0, width - 1);
  t.x1 = std::clamp(int(fx) + 1, 0, width - 1);
  t.y0 = std::clamp(int(fy), 0, height - 1);
  t.y1 = std::clamp(int(fy) + 1, 0, height - 1);
  return t;
}

struct RgbSample {
  double r = 0, g = 0, b = 0;
  bool valid = false;
};

RgbSample sample_bilinear_clamp(const Image& img, double ix, double iy) {
  const TapWeights t = clamp_taps(ix, iy, img.width, img.height);
  const double w00 = (1 - t.wx1) * (1 - t.wy1);
  const double w10 = t.wx1 * (1 - t.wy1);
  const double w01 = (1 - t.wx1) * t.wy1;
  const double w11 = t.wx1 * t.wy1;

  RgbSample s;
  s.valid = (w00 == 0 || img.is_valid(t.x0, t.y0)) && (w10 == 0 || img.is_valid(t.x1, t.y0)) &&
            (w01 == 0 || img.is_valid(t.x0, t.y1)) && (w11 == 0 || img.is_valid(t.x1, t.y1));
  if (!s.valid) {
    return s;
  }
  const float* p00 = img.px(t.x0, t.y0);
  const float* p10 = img.px(t.x1, t.y0);
  const float* p01 = img.px(t.x0, t.y1);
  const float* p11 = img.px(t.x1, t.y1);
  s.r = w00 * p00[0] + w10 * p10[0] + w01 * p01[0] + w11 * p11[0];
  s.g = w00 * p00[1] + w10 * p10[1] + w01 * p01[1] + w11 * p11[1];
  s.b = w00 * p00[2] + w10 * p10[2] + w01 * p01[2] + w11 * p11[2];
  return s;
}

// Equirect sampling wraps horizontally (sphere topology) and clamps
// vertically.
struct WrapTaps {
  int x0, x1, y0, y1;
  double wx1, wy1;
};

WrapTaps wrap_taps(double ix, double iy, int width, int height) {
  ix = snap_index(ix);
  iy = snap_index(iy);
  double fx = std::floor(ix);
  const double fy = std::floor(iy);
  WrapTaps t;
  t.wx1 = ix - fx;
  t.wy1 = iy - fy;
  int x0 = int(fx) % width;
  if (x0 < 0) {
    x0 += width;
  }
  t.x0 = x0;
  t.x1 = (x0 + 1) % width;
  t.y0 = std::clamp(int(fy), 0, height - 1);
  t.y1 = std::clamp(int(fy) + 1, 0, height - 1);
  return t;
}

RgbSample sample_bilinear_wrap(const Image& img, double ix, double iy) {
  const WrapTaps t = wrap_taps(ix, iy, img.width, img.height);
  const double w00 = (1 - t.wx1) * (1 - t.wy1);
  const double w10 = t.wx1 * (1 - t.wy1);
  const double w01 = (1 - t.wx1) * t.wy1;
  const double w11 = t.wx1 * t.wy1;

  RgbSample s;
  s.valid = (w00 == 0 || img.is_valid(t.x0, t.y0)) && (w10 == 0 || img.is_valid(t.x1, t.y0)) &&
            (w01 == 0 || img.is_valid(t.x0, t.y1)) && (w11 == 0 || img.is_valid(t.x1, t.y1));
  if (!s.valid) {
    return s;
  }
  const float* p00 = img.px(t.x0, t.y0);
  const float* p10 = img.px(t.x1, t.y0);
  const float* p01 = img.px(t.x0, t.y1);
  const float* p11 = img.px(t.x1, t.y1);
  s.r = w00 * p00[0] + w10 * p10[0] + w01 * p01[0] + w11 * p11[0];
  s.g = w00 * p00[1] + w10 * p10[1] + w01 * p01[1] + w11 * p11[1];
  s.b = w00 * p00[2] + w10 * p10[2] + w01 * p01[2] + w11 * p11[2];
  return s;
}

struct DepthSample {
  double value = 0;
  bool valid = false;
};

DepthSample sample_depth_wrap(const DepthMap& depth, double ix, double iy) {
  const WrapTaps t = wrap_taps(ix, iy, depth.width, depth.height);
  const double w00 = (1 - t.wx1) * (1 - t.wy1);
  const double w10 = t.wx1 * (1 - t.wy1);
  const double w01 = (1 - t.wx1) * t.wy1;
  const double w11 = t.wx1 * t.wy1;

  DepthSample s;
  s.valid = (w00 == 0 || depth.is_valid(t.x0, t.y0)) && (w10 == 0 || depth.is_valid(t.x1, t.y0)) &&
            (w01 == 0 || depth.is_valid(t.x0, t.y1)) && (w11 == 0 || depth.is_valid(t.x1, t.y1));
  if (!s.valid) {
    return s;
  }
  s.value = w00 * depth.at(t.x0, t.y0) + w10 * depth.at(t.x1, t.y0) + w01 * depth.at(t.x0, t.y1) +
            w11 * depth.at(t.x1, t.y1);
  return s;
}

}  // namespace

Eigen::Vector3d equirect_direction_continuous(double u, double v, int width, int height) {
  const double theta = (u + 0.5) / width * 2.0 * kPi - kPi;
  const double phi = (v + 0.5) / height * kPi;
  const double sin_phi = std::sin(phi);
  return {sin_phi * std::sin(theta), -std::cos(phi), sin_phi * std::cos(theta)};
}

Eigen::Vector3d equirect_to_direction(int u, int v, int width, int height) {
  if (width != 2 * height) {
    throw ParameterError("equirect dimensions must satisfy width = 2*height");
  }
  if (u < 0 || u >= width || v < 0 || v >= height) {
    throw ParameterError("equirect pixel out of range");
  }
  return equirect_direction_continuous(u, v, width, height);
}

Eigen::Vector2d direction_to_equirect(const Eigen::Vector3d& dir, int width, int height) {
  const double norm = dir.norm();
  if (!(norm > 0.0)) {
    throw ParameterError("cannot map the zero vector to the sphere");
  }
  const double theta = std::atan2(dir.x(), dir.z());
  const double phi = std::acos(std::clamp(-dir.y() / norm, -1.0, 1.0));
  return {(theta + kPi) / (2.0 * kPi) * width - 0.5, phi / kPi * height - 0.5};
}

WarpResult warp_rotate(const PerspectiveImage& src, const Eigen::Matrix3d& rotation) {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw ParameterError("warp_rotate requires a pure rotation");
  }

  const CameraIntrinsics& k = src.intrinsics;
  WarpResult out;
  out.image.image = Image(k.width, k.height);
  out.image.intrinsics = k;
  out.image.pose = Pose(project_to_rotation(rotation * src.pose.rotation()), src.pose.position());
  out.inpaint_mask = ViewMask(k.width, k.height, MaskKind::kInpaintRegion);

  const Eigen::Matrix3d to_src = rotation.transpose();
  parallel_for(0, k.height, [&](int y) {
    for (int x = 0; x < k.width; x++) {
      const Eigen::Vector3d d_dst((x + 0.5 - k.cx) / k.fx, (y + 0.5 - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d d_src = to_src * d_dst;
      bool covered = false;
      if (d_src.z() > 0.0) {
        const double pu = k.fx * d_src.x() / d_src.z() + k.cx;
        const double pv = k.fy * d_src.y() / d_src.z() + k.cy;
        if (pu >= 0.0 && pu < k.width && pv >= 0.0 && pv < k.height) {
          covered = true;
          const RgbSample s = sample_bilinear_clamp(src.image, pu - 0.5, pv - 0.5);
          if (s.valid) {
            float* p = out.image.image.px(x, y);
            p[0] = float(s.r);
            p[1] = float(s.g);
            p[2] = float(s.b);
            out.image.image.set_valid(x, y, true);
          } else {
            out.image.image.set_valid(x, y, false);
          }
        }
      }
      if (!covered) {
        out.image.image.set_valid(x, y, false);
        out.inpaint_mask.set(x, y, true);
      }
    }
  });
  return out;
}

EquirectImage perspective_to_equirect(const std::vector<PerspectiveImage>& views, int width) {
  if (views.empty()) {
    throw ParameterError("perspective_to_equirect requires at least one view");
  }
  if (width < 2 || width % 2 != 0) {
    throw ParameterError("panorama width must be a positive even number");
  }
  const Eigen::Vector3d center = views.front().pose.position();
  for (const PerspectiveImage& v : views) {
    if ((v.pose.position() - center).norm() > 1e-9) {
      throw ParameterError("all views must share one camera position");
    }
  }

  const int height = width / 2;
  Image pano(width, height, 0.f, 0.f, 0.f, false);

  parallel_for(0, height, [&](int v) {
    for (int u = 0; u < width; u++) {
      const Eigen::Vector3d dir = equirect_direction_continuous(u, v, width, height);
      double acc[3] = {0, 0, 0};
      double weight_sum = 0.0;
      for (const PerspectiveImage& view : views) {
        const Eigen::Vector3d dc = view.pose.rotation() * dir;
        if (dc.z() <= 0.0) {
          continue;
        }
        const CameraIntrinsics& k = view.intrinsics;
        const double pu = k.fx * dc.x() / dc.z() + k.cx;
        const double pv = k.fy * dc.y() / dc.z() + k.cy;
        if (pu < 0.0 || pu >= k.width || pv < 0.0 || pv >= k.height) {
          continue;
        }
        const RgbSample s = sample_bilinear_clamp(view.image, pu - 0.5, pv - 0.5);
        if (!s.valid) {
          continue;
        }
        const double cos_axis = dc.z();
        const double w = cos_axis * cos_axis * cos_axis * cos_axis;
        acc[0] += w * s.r;
        acc[1] += w * s.g;
        acc[2] += w * s.b;
        weight_sum += w;
      }
      if (weight_sum > 0.0) {
        float* p = pano.px(u, v);
        p[0] = float(acc[0] / weight_sum);
        p[1] = float(acc[1] / weight_sum);
        p[2] = float(acc[2] / weight_sum);
        pano.set_valid(u, v, true);
      }
    }
  });
  return EquirectImage(std::move(pano));
}

PerspectiveImage equirect_to_perspective(const EquirectImage& pano, const Pose& pose,
                                         const CameraIntrinsics& intrinsics) {
  PerspectiveImage out;
  out.image = Image(intrinsics.width, intrinsics.height, 0.f, 0.f, 0.f, false);
  out.intrinsics = intrinsics;
  out.pose = pose;

  const int pw = pano.width();
  const int ph = pano.height();
  parallel_for(0, intrinsics.height, [&](int y) {
    for (int x = 0; x < intrinsics.width; x++) {
      const Eigen::Vector3d d_cam((x + 0.5 - intrinsics.cx) / intrinsics.fx,
                                  (y + 0.5 - intrinsics.cy) / intrinsics.fy, 1.0);
      const Eigen::Vector3d d_world = pose.direction_to_world(d_cam);
      const Eigen::Vector2d uv = direction_to_equirect(d_world, pw, ph);
      const RgbSample s = sample_bilinear_wrap(pano.image, uv.x(), uv.y());
      if (s.valid) {
        float* p = out.image.px(x, y);
        p[0] = float(s.r);
        p[1] = float(s.g);
        p[2] = float(s.b);
        out.image.set_valid(x, y, true);
      }
    }
  });
  return out;
}

DepthMap equirect_depth_to_perspective(const DepthMap& pano_depth, const Pose& pose,
                                       const CameraIntrinsics& intrinsics) {
  if (pano_depth.width != 2 * pano_depth.height) {
    throw ParameterError("panorama depth must be 2:1");
  }
  DepthMap out(intrinsics.width, intrinsics.height, 0.0, false);
  parallel_for(0, intrinsics.height, [&](int y) {
    for (int x = 0; x < intrinsics.width; x++) {
      const Eigen::Vector3d d_cam((x + 0.5 - intrinsics.cx) / intrinsics.fx,
                                  (y + 0.5 - intrinsics.cy) / intrinsics.fy, 1.0);
      const Eigen::Vector3d d_world = pose.direction_to_world(d_cam);
      const Eigen::Vector2d uv = direction_to_equirect(d_world, pano_depth.width, pano_depth.height);
      const DepthSample s = sample_depth_wrap(pano_depth, uv.x(), uv.y());
      if (s.valid && s.value > 0.0) {
        out.set(x, y, s.value);
        out.set_valid(x, y, true);
      }
    }
  });
  return out;
}

ViewMask pole_completion_mask(const EquirectImage& pano) {
  ViewMask mask(pano.width(), pano.height(), MaskKind::kInpaintRegion);
  for (int y = 0; y < pano.height(); y++) {
    for (int x = 0; x < pano.width(); x++) {
      mask.set(x, y, !pano.image.is_valid(x, y));
    }
  }
  return mask;
}

std::string equirect_sidecar_json(int width, int height) {
  JsonWriter w;
  w.begin_object();
  w.key("projection").value("equirectangular");
  w.key("width").value(width);
  w.key("height").value(height);
  w.end_object();
  return w.str();
}

}  // namespace panoscene
