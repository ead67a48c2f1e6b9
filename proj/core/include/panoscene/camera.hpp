#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "panoscene/image.hpp"

namespace panoscene {

/// Pinhole intrinsics. Pixel centers sit at integer index + 0.5 in the
/// continuous pixel coordinates used throughout, so a point projecting to
/// u in [0, width) lands inside the image.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height);

  /// Builds square-pixel intrinsics for a horizontal field of view, principal
  /// point at the image center: fx = width / (2 tan(fov/2)).
  static CameraIntrinsics from_fov(double fov_deg, int width, int height);

  double fov_x_rad() const;
  double fov_y_rad() const;
};

/// Rigid world-to-camera transform. `rotation` maps world directions into
/// the camera frame (x right, y down, z forward); `position` is the camera
/// center in world coordinates, so world_to_camera(p) = R (p - position).
class Pose {
public:
  Pose();
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& position);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& position() const { return position_; }

  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& p) const {
    return rotation_ * (p - position_);
  }
  Eigen::Vector3d camera_to_world(const Eigen::Vector3d& p) const {
    return rotation_.transpose() * p + position_;
  }
  /// Rotates a camera-frame direction into the world frame.
  Eigen::Vector3d direction_to_world(const Eigen::Vector3d& d) const {
    return rotation_.transpose() * d;
  }

  // Local camera axes expressed in world coordinates.
  Eigen::Vector3d right_axis() const { return rotation_.row(0); }
  Eigen::Vector3d down_axis() const { return rotation_.row(1); }
  Eigen::Vector3d up_axis() const { return -rotation_.row(1); }
  Eigen::Vector3d forward_axis() const { return rotation_.row(2); }

  int chain_length() const { return chain_; }

  friend Pose pose_compose(const Pose& a, const Pose& b);

private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d position_;
  int chain_ = 0;  // compositions since the last orthonormal re-projection
};

/// Applies b then a. Rotations are re-projected to the nearest rotation
/// (polar decomposition) once a composition chain exceeds 64 links, which
/// bounds orthonormality drift.
Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);

/// Nearest rotation matrix in the Frobenius sense.
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

/// Camera rotation looking along the direction given by azimuth/elevation,
/// with the world "up" (-y) kept upward in the frame. Azimuth 0, elevation 0
/// looks along +z; azimuth grows toward +x; positive elevation looks up.
Pose look_at_pose(const Eigen::Vector3d& position, double azimuth_rad, double elevation_rad);

/// Unit direction for the same spherical convention.
Eigen::Vector3d direction_from_azimuth_elevation(double azimuth_rad, double elevation_rad);

struct Camera {
  Pose pose;
  CameraIntrinsics intrinsics;
};

enum class OffsetDirection { kUp, kDown, kLeft, kRight };

const char* to_string(OffsetDirection d);
OffsetDirection offset_direction_from_string(const std::string& s);

struct SupplementaryCamera {
  int base_index = 0;
  OffsetDirection direction = OffsetDirection::kUp;
  Pose pose;
  CameraIntrinsics intrinsics;
};

struct CameraSet {
  std::vector<Camera> base;
  std::vector<SupplementaryCamera> supplementary;
};

/// One viewing direction of the deterministic base layout.
struct BaseDirection {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

/// Deterministic layout of `count` viewing directions, a pure function of
/// count and fov_deg:
///   - ring_step = max(fov_deg - 15, fov_deg / 2) degrees, so vertically
///     adjacent rings overlap by at least 15 degrees;
///   - rings = clamp(count / 4, 1, ceil(180 / ring_step)), elevations
///     centered on the equator and spaced ring_step apart;
///   - every ring gets one camera, the rest are apportioned by largest
///     remainder on cos(elevation);
///   - azimuths are uniform per ring, odd rings staggered by half a step.
/// Rings are listed bottom to top, cameras in azimuth order.
std::vector<BaseDirection> base_camera_directions(int count, double fov_deg);

/// Base cameras all positioned at `center`, oriented per
/// base_camera_directions, square images at `resolution` with the given FoV.
CameraSet build_base_cameras(int count, double fov_deg, int resolution,
                             const Eigen::Vector3d& center);

/// Adds four cameras per base camera, translated by `offset` along the base
/// camera's local up/down/left/right axes with the rotation unchanged.
CameraSet build_supplementary_cameras(const CameraSet& base, double offset);

std::string camera_set_to_json(const CameraSet& set);
CameraSet camera_set_from_json(const std::string& text);

/// An image together with the camera that produced it.
struct PerspectiveImage {
  Image image;
  CameraIntrinsics intrinsics;
  Pose pose;
};

}  // namespace panoscene
