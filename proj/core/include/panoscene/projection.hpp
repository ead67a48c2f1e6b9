#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/image.hpp"

namespace panoscene {

/// Direction of the ray through the center of equirect pixel (u, v):
/// azimuth theta = (u+0.5)/W * 2pi - pi, polar phi = (v+0.5)/H * pi with
/// phi = 0 at the top row (world up = -y). The image center maps to +z.
/// Throws ParameterError for out-of-range pixels or W != 2H.
Eigen::Vector3d equirect_to_direction(int u, int v, int width, int height);

/// Same mapping for continuous pixel coordinates (no bounds check).
Eigen::Vector3d equirect_direction_continuous(double u, double v, int width, int height);

/// Inverse mapping; returns continuous pixel indices (u in [-0.5, W-0.5),
/// v in [-0.5, H-0.5]) for a direction that need not be normalized.
Eigen::Vector2d direction_to_equirect(const Eigen::Vector3d& dir, int width, int height);

struct WarpResult {
  PerspectiveImage image;
  ViewMask inpaint_mask;  // destination pixels with no source coverage
};

/// Re-renders `src` as seen after rotating the camera by `rotation`
/// (camera-frame coordinates map as p_new = rotation * p_old). Destination
/// rays are rotated back into the source frame and sampled bilinearly; rays
/// leaving the source frustum are masked for inpainting. An identity
/// rotation reproduces the input bit for bit.
WarpResult warp_rotate(const PerspectiveImage& src, const Eigen::Matrix3d& rotation);

/// Gathers every view into one equirectangular panorama. All views must
/// share a camera position. Overlaps are blended with weights
/// cos(angle to view axis)^4, normalized per pixel.
EquirectImage perspective_to_equirect(const std::vector<PerspectiveImage>& views, int width);

/// Samples a perspective view out of the panorama for a camera at the
/// panorama center (only the rotation of `pose` is used).
PerspectiveImage equirect_to_perspective(const EquirectImage& pano, const Pose& pose,
                                         const CameraIntrinsics& intrinsics);

/// Scalar variant used for panorama depth.
DepthMap equirect_depth_to_perspective(const DepthMap& pano_depth, const Pose& pose,
                                       const CameraIntrinsics& intrinsics);

/// Mask of unfilled panorama pixels (¬valid), the write region for the
/// panorama inpainting plugin.
ViewMask pole_completion_mask(const EquirectImage& pano);

/// JSON sidecar contents written next to every stored equirect image.
std::string equirect_sidecar_json(int width, int height);

}  // namespace panoscene
