#pragma once

#include <string>
#include <vector>

#include "panoscene/image.hpp"

namespace panoscene {

/// Inverse-depth floor; rectified pixels whose disparity falls at or below
/// this are invalidated instead of producing near-infinite depth.
constexpr double kDisparityFloor = 1e-6;

/// Closed-form solution of the masked disparity least squares
///   min_{alpha,beta} || M ⊙ (alpha / d_p + beta - 1 / d) ||^2
/// plus the scalar depth-ratio summary gamma = median(d_hat / d) over the
/// same mask.
struct AlignmentSolution {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 1.0;
  double residual = 0.0;  // mean squared masked disparity error
  size_t pixels_used = 0;
};

/// Solves the 2x2 normal equations over pixels that are masked and valid in
/// both maps. Accumulation order is fixed (row-major scan), so results are
/// reproducible. Throws DegenerateInputError when fewer than two usable
/// pixels exist or 1/d_p is constant on the mask.
AlignmentSolution solve_disparity_alignment(const DepthMap& d, const DepthMap& d_p,
                                            const ViewMask& mask);

/// d_hat = 1 / (alpha / d_p + beta) per valid pixel; pixels whose disparity
/// expression is <= kDisparityFloor become invalid.
DepthMap rectify_depth(const DepthMap& d_p, const AlignmentSolution& sol);

/// Median of d_hat/d over pixels valid in both maps (even count averages the
/// two middle values). Throws DegenerateInputError on empty overlap.
double scale_factor(const DepthMap& d, const DepthMap& d_hat);

/// Multiplies every frame by the scale factor, leaving validity untouched.
std::vector<DepthMap> scale_factor_and_propagate(const DepthMap& d, const DepthMap& d_hat,
                                                 std::vector<DepthMap> frames,
                                                 double* gamma_out = nullptr);

/// Gaussian-blurs (7x7, sigma 1.4, kernel renormalized) only the band of
/// pixels within Chebyshev distance 3 of the mask boundary; all other pixels
/// are returned bit-identical. A boundary pixel is one with a 4-neighbor on
/// the other side of the mask. Within the band the kernel is renormalized
/// over in-bounds valid taps; band pixels with no valid tap are copied.
DepthMap smooth_mask_edges(const DepthMap& d_hat, const ViewMask& mask);

std::string alignment_to_json(const AlignmentSolution& sol);
AlignmentSolution alignment_from_json(const std::string& text);

}  // namespace panoscene
