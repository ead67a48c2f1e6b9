#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "panoscene/camera.hpp"
#include "panoscene/image.hpp"
#include "panoscene/point_cloud.hpp"

namespace panoscene {

/// Anisotropic 3D Gaussian with opacity and color. Construction validates
/// symmetry (1e-12), positive-definiteness, and alpha in (0,1]; the inverse
/// covariance and largest eigenvalue are precomputed.
class Gaussian3D {
public:
  Gaussian3D(const Eigen::Vector3d& mu, const Eigen::Matrix3d& sigma, double alpha,
             const Eigen::Vector3f& color);

  const Eigen::Vector3d& mu() const { return mu_; }
  const Eigen::Matrix3d& sigma() const { return sigma_; }
  const Eigen::Matrix3d& sigma_inv() const { return sigma_inv_; }
  double alpha() const { return alpha_; }
  const Eigen::Vector3f& color() const { return color_; }
  double max_eigenvalue() const { return max_eigenvalue_; }

private:
  Eigen::Vector3d mu_;
  Eigen::Matrix3d sigma_;
  Eigen::Matrix3d sigma_inv_;
  double alpha_;
  Eigen::Vector3f color_;
  double max_eigenvalue_;
};

struct GaussianSet {
  std::vector<Gaussian3D> gaussians;
};

/// exp(-1/2 (p-mu)^T Sigma^-1 (p-mu)), in (0, 1].
double eval_gaussian(const Gaussian3D& g, const Eigen::Vector3d& p);

struct RenderOptions {
  /// Gaussians whose squared Mahalanobis distance at the ray's closest
  /// approach exceeds this are skipped; exp(-40/2) ~ 2e-9 keeps the skip
  /// error well under the renderer's 1e-6 contract against a no-cutoff
  /// reference even at hundreds of Gaussians.
  double mahalanobis_sq_cutoff = 40.0;
  /// Transmittance below which compositing stops early.
  double min_transmittance = 1e-9;
  /// Pixels with accumulated opacity below this have no depth.
  double min_accum_opacity = 0.01;
  int tile_size = 16;
};

struct RenderResult {
  PerspectiveImage image;  // black background, all pixels valid
  DepthMap depth;          // opacity-weighted closest-approach distance
};

/// Forward volume compositing: per pixel ray each Gaussian contributes
/// sigma_i = alpha_i * G(x_i) evaluated at the ray's closest approach to
/// mu_i, composited front to back in order of closest-approach distance
/// (index as tiebreak). Gaussians behind the camera (t <= 0) are skipped.
/// The result is independent of input order and of the thread count.
RenderResult render(const GaussianSet& set, const Pose& pose, const CameraIntrinsics& intrinsics,
                    const RenderOptions& options = {});

struct GaussianConversionOptions {
  double alpha = 0.9;
  double radius_multiplier = 1.0;
  int knn = 3;
  /// Lower bound on the standard deviation. Clouds lifted from
  /// equirectangular grids cluster azimuthally near the poles, which
  /// collapses the neighbor estimate there; a floor at half the grid's row
  /// spacing keeps those rows covered. 0 disables the floor.
  double min_sigma = 0.0;
};

/// One isotropic Gaussian per point with standard deviation
/// max(radius_multiplier * mean distance to the knn nearest neighbors,
/// min_sigma); neighbors are exact via a uniform hash grid.
GaussianSet pointcloud_to_gaussians(const PointCloud& cloud,
                                    const GaussianConversionOptions& options = {});

/// Everything the two-stage optimization consumes, written as plain files.
struct TrainingBundle {
  CameraSet cameras;  // base + supplementary
  std::vector<Image> base_images;
  std::vector<Image> supp_images;
  std::vector<ViewMask> supp_masks;
  std::vector<Camera> moving_cameras;
  std::vector<Image> moving_images;
  PointCloud cloud;
  int stage_boundary = 5000;
};

/// Writes cameras.json, images/{base|supp|moving}_%04d.png,
/// masks/supp_%04d.png, points.ply and manifest.json. Stage 1 lists the base
/// and moving ids, stage 2 the supplementary ids.
void export_training_bundle(const std::string& dir, const TrainingBundle& bundle);
TrainingBundle read_training_bundle(const std::string& dir);

}  // namespace panoscene
