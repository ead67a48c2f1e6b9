#include "panoscene/point_cloud.hpp"

#include <cmath>
#include <limits>

#include "panoscene/errors.hpp"
#include "panoscene/projection.hpp"

namespace panoscene {

std::string to_string(const SourceTag& tag) {
  switch (tag.kind) {
    case SourceKind::kPanorama: return "panorama";
    case SourceKind::kSupplementary: return "supplementary";
    case SourceKind::kMoving: return "moving:" + std::to_string(tag.index);
  }
  return "panorama";
}

SourceTag source_tag_from_string(const std::string& s) {
  if (s == "panorama") {
    return {SourceKind::kPanorama, -1};
  }
  if (s == "supplementary") {
    return {SourceKind::kSupplementary, -1};
  }
  if (s.rfind("moving:", 0) == 0) {
    return {SourceKind::kMoving, std::stoi(s.substr(7))};
  }
  throw ParameterError("unknown point source tag: " + s);
}

PointCloud lift_equirect(const EquirectImage& pano, const DepthMap& depth,
                         const Eigen::Vector3d& center, const SourceTag& tag) {
  if (pano.width() != depth.width || pano.height() != depth.height) {
    throw ParameterError("lift_equirect: panorama and depth dimensions differ");
  }
  PointCloud cloud;
  cloud.positions.reserve(pano.image.pixel_count());
  for (int v = 0; v < pano.height(); v++) {
    for (int u = 0; u < pano.width(); u++) {
      if (!pano.image.is_valid(u, v) || !depth.is_valid(u, v)) {
        continue;
      }
      const Eigen::Vector3d dir =
          equirect_direction_continuous(u, v, pano.width(), pano.height());
      const float* p = pano.image.px(u, v);
      cloud.append(center + depth.at(u, v) * dir, {p[0], p[1], p[2]}, tag);
    }
  }
  return cloud;
}

PointCloud lift_perspective(const Image& image, const DepthMap& depth, const Pose& pose,
                            const CameraIntrinsics& intrinsics, const SourceTag& tag) {
  if (image.width != depth.width || image.height != depth.height ||
      image.width != intrinsics.width || image.height != intrinsics.height) {
    throw ParameterError("lift_perspective: dimensions differ");
  }
  PointCloud cloud;
  for (int y = 0; y < image.height; y++) {
    for (int x = 0; x < image.width; x++) {
      if (!image.is_valid(x, y) || !depth.is_valid(x, y)) {
        continue;
      }
      const Eigen::Vector3d ray((x + 0.5 - intrinsics.cx) / intrinsics.fx,
                                (y + 0.5 - intrinsics.cy) / intrinsics.fy, 1.0);
      const Eigen::Vector3d dir = pose.direction_to_world(ray.normalized());
      const float* p = image.px(x, y);
      cloud.append(pose.position() + depth.at(x, y) * dir, {p[0], p[1], p[2]}, tag);
    }
  }
  return cloud;
}

std::vector<Eigen::Vector3d> world_to_camera(const PointCloud& points, const Pose& pose) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const Eigen::Vector3d& p : points.positions) {
    out.push_back(pose.world_to_camera(p));
  }
  return out;
}

ProjectedPoints project_points(const std::vector<Eigen::Vector3d>& cam_points,
                               const CameraIntrinsics& intrinsics) {
  ProjectedPoints out;
  out.u.resize(cam_points.size());
  out.v.resize(cam_points.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t i = 0; i < cam_points.size(); i++) {
    const Eigen::Vector3d& p = cam_points[i];
    if (p.z() > 0.0) {
      out.u[i] = intrinsics.fx * p.x() / p.z() + intrinsics.cx;
      out.v[i] = intrinsics.fy * p.y() / p.z() + intrinsics.cy;
    } else {
      out.u[i] = nan;
      out.v[i] = nan;
    }
  }
  return out;
}

VisibilityResult visibility_mask(const PointCloud& points, const Pose& pose,
                                 const CameraIntrinsics& intrinsics) {
  const std::vector<Eigen::Vector3d> cam = world_to_camera(points, pose);
  const ProjectedPoints proj = project_points(cam, intrinsics);

  VisibilityResult res;
  const size_t n = points.size();
  res.m_front.resize(n);
  res.m_bound.resize(n);
  res.m.resize(n);
  res.u = proj.u;
  res.v = proj.v;
  for (size_t i = 0; i < n; i++) {
    const bool front = cam[i].z() > 0.0;
    const bool bound = front && proj.u[i] >= 0.0 && proj.u[i] < intrinsics.width &&
                       proj.v[i] >= 0.0 && proj.v[i] < intrinsics.height;
    res.m_front[i] = front;
    res.m_bound[i] = bound;
    res.m[i] = !(bound && front);
  }
  return res;
}

PointCloud filter_moving_scene(const PointCloud& points, const Pose& first_pose,
                               const CameraIntrinsics& intrinsics) {
  const VisibilityResult vis = visibility_mask(points, first_pose, intrinsics);
  PointCloud out;
  for (size_t i = 0; i < points.size(); i++) {
    if (vis.m[i]) {
      out.append(points.positions[i], points.colors[i], points.tags[i]);
    }
  }
  return out;
}

PointCloud fuse(const PointCloud& panorama, const std::vector<PointCloud>& moving) {
  PointCloud out = panorama;
  for (const PointCloud& cloud : moving) {
    out.positions.insert(out.positions.end(), cloud.positions.begin(), cloud.positions.end());
    out.colors.insert(out.colors.end(), cloud.colors.begin(), cloud.colors.end());
    out.tags.insert(out.tags.end(), cloud.tags.begin(), cloud.tags.end());
  }
  return out;
}

}  // namespace panoscene
