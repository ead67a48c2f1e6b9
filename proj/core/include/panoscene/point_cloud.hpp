#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/image.hpp"

namespace panoscene {

enum class SourceKind { kPanorama, kMoving, kSupplementary };

/// Provenance of a point; moving scenes carry their scene index.
struct SourceTag {
  SourceKind kind = SourceKind::kPanorama;
  int index = -1;

  bool operator==(const SourceTag&) const = default;
};

std::string to_string(const SourceTag& tag);  // "panorama" | "moving:2" | "supplementary"
SourceTag source_tag_from_string(const std::string& s);

/// Colored points in world coordinates with per-point provenance.
struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3f> colors;  // rgb in [0,1]
  std::vector<SourceTag> tags;

  size_t size() const { return positions.size(); }
  void append(const Eigen::Vector3d& p, const Eigen::Vector3f& c, const SourceTag& t) {
    positions.push_back(p);
    colors.push_back(c);
    tags.push_back(t);
  }
};

/// One point per valid panorama pixel at
/// center + depth(u,v) * equirect_to_direction(u,v).
PointCloud lift_equirect(const EquirectImage& pano, const DepthMap& depth,
                         const Eigen::Vector3d& center = Eigen::Vector3d::Zero(),
                         const SourceTag& tag = {SourceKind::kPanorama, -1});

/// One point per pixel valid in both image and depth, at
/// position + depth * unit pixel ray (depth is Euclidean range).
PointCloud lift_perspective(const Image& image, const DepthMap& depth, const Pose& pose,
                            const CameraIntrinsics& intrinsics, const SourceTag& tag);

/// Applies the rigid world-to-camera transform to every point.
std::vector<Eigen::Vector3d> world_to_camera(const PointCloud& points, const Pose& pose);

struct ProjectedPoints {
  std::vector<double> u;  // NaN where z <= 0
  std::vector<double> v;
};

/// Pinhole projection u = fx x/z + cx, v = fy y/z + cy for camera-frame
/// points with z > 0; points at or behind the camera plane get NaN.
ProjectedPoints project_points(const std::vector<Eigen::Vector3d>& cam_points,
                               const CameraIntrinsics& intrinsics);

/// Per-point view masks: m_front = (z > 0), m_bound = (0 <= u < W and
/// 0 <= v < H), and the keep mask m = ¬(m_bound ∧ m_front) marking points
/// outside the camera's view.
struct VisibilityResult {
  std::vector<uint8_t> m_front;
  std::vector<uint8_t> m_bound;
  std::vector<uint8_t> m;
  std::vector<double> u;
  std::vector<double> v;
};

VisibilityResult visibility_mask(const PointCloud& points, const Pose& pose,
                                 const CameraIntrinsics& intrinsics);

/// Keeps only the points not visible from the given camera (m = 1). Output
/// order is input order.
PointCloud filter_moving_scene(const PointCloud& points, const Pose& first_pose,
                               const CameraIntrinsics& intrinsics);

/// Concatenates the panorama cloud with every moving-scene cloud, tags
/// preserved. Inputs must already share the world frame and scale.
PointCloud fuse(const PointCloud& panorama, const std::vector<PointCloud>& moving);

// Binary little-endian PLY with float32 x,y,z and uint8 red,green,blue plus
// source tag comments.
void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(const std::string& path);

}  // namespace panoscene
