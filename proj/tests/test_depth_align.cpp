#include "panoscene/depth_align.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

#include "panoscene/errors.hpp"

using namespace panoscene;

namespace {

DepthMap random_depth(int w, int h, uint32_t seed, double lo = 0.5, double hi = 5.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(std::log(lo), std::log(hi));
  DepthMap d(w, h);
  for (double& v : d.values) {
    v = std::exp(dist(rng));
  }
  return d;
}

ViewMask full_mask(int w, int h) {
  return ViewMask(w, h, MaskKind::kOverlap, true);
}

/// Masked mean squared disparity error evaluated directly from the maps.
double residual_at(const DepthMap& d, const DepthMap& d_p, const ViewMask& mask, double alpha,
                   double beta) {
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < d.values.size(); i++) {
    if (!mask.bits[i] || !d.valid[i] || !d_p.valid[i]) {
      continue;
    }
    const double r = alpha / d_p.values[i] + beta - 1.0 / d.values[i];
    sum += r * r;
    n++;
  }
  return sum / double(n);
}

/// Dense 7x7 Gaussian convolution reference. Independent implementation of
/// the same band and renormalization rules as smooth_mask_edges.
DepthMap dense_smooth_reference(const DepthMap& input, const ViewMask& mask) {
  const int w = input.width, h = input.height;
  const double sigma = 1.4;
  DepthMap out = input;
  for (int y = 0; y < h; y++) {
    for (int x = 0; x < w; x++) {
      bool band = false;
      for (int dy = -3; dy <= 3; dy++) {
        for (int dx = -3; dx <= 3; dx++) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && nx < w && ny >= 0 && ny < h && mask.at(nx, ny) != mask.at(x, y)) {
            band = true;
          }
        }
      }
      if (!band) {
        continue;
      }
      double acc = 0.0, weight = 0.0;
      for (int dy = -3; dy <= 3; dy++) {
        for (int dx = -3; dx <= 3; dx++) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h || !input.is_valid(nx, ny)) {
            continue;
          }
          const double k = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          acc += k * input.at(nx, ny);
          weight += k;
        }
      }
      if (weight > 0.0) {
        out.set(x, y, acc / weight);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("identity alignment recovers alpha=1 beta=0") {
  const DepthMap d = random_depth(32, 32, 1);
  const AlignmentSolution sol = solve_disparity_alignment(d, d, full_mask(32, 32));
  CHECK(std::abs(sol.alpha - 1.0) < 1e-12);
  CHECK(std::abs(sol.beta) < 1e-12);
  CHECK(sol.pixels_used == 32 * 32);
  CHECK(std::abs(sol.gamma - 1.0) < 1e-12);
}

TEST_CASE("constructed ground truth is recovered exactly") {
  const DepthMap d_p = random_depth(64, 64, 2);
  DepthMap d = d_p;
  for (size_t i = 0; i < d.values.size(); i++) {
    d.values[i] = 1.0 / (2.0 / d_p.values[i] + 0.05);
  }
  const AlignmentSolution sol = solve_disparity_alignment(d, d_p, full_mask(64, 64));
  CHECK(std::abs(sol.alpha - 2.0) / 2.0 < 1e-9);
  CHECK(std::abs(sol.beta - 0.05) / 0.05 < 1e-9);
  CHECK(sol.residual < 1e-18);
}

TEST_CASE("solution beats a grid search around it") {
  const DepthMap d_p = random_depth(48, 48, 3);
  DepthMap d = d_p;
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  for (size_t i = 0; i < d.values.size(); i++) {
    d.values[i] = 1.0 / ((1.7 / d_p.values[i] + 0.12) * (1.0 + noise(rng)));
  }
  const ViewMask mask = full_mask(48, 48);
  const AlignmentSolution sol = solve_disparity_alignment(d, d_p, mask);
  const double center = residual_at(d, d_p, mask, sol.alpha, sol.beta);
  const double da = 0.05 * std::max(std::abs(sol.alpha), 1e-3);
  const double db = 0.05 * std::max(std::abs(sol.beta), 1e-3);
  for (int i = 0; i <= 200; i += 8) {
    for (int j = 0; j <= 200; j += 8) {
      const double a = sol.alpha + (i - 100) / 100.0 * da;
      const double b = sol.beta + (j - 100) / 100.0 * db;
      CHECK(center <= residual_at(d, d_p, mask, a, b) + 1e-18);
    }
  }
}

TEST_CASE("normal-equation gradient vanishes at the solution") {
  const DepthMap d_p = random_depth(40, 40, 77);
  DepthMap d = d_p;
  std::mt19937 rng(78);
  std::uniform_real_distribution<double> noise(-0.02, 0.02);
  for (size_t i = 0; i < d.values.size(); i++) {
    d.values[i] = 1.0 / ((1.3 / d_p.values[i] + 0.07) * (1.0 + noise(rng)));
  }
  const AlignmentSolution sol = solve_disparity_alignment(d, d_p, full_mask(40, 40));

  double sxx = 0, sx = 0, sxy = 0, sy = 0, n = 0;
  for (size_t i = 0; i < d.values.size(); i++) {
    const double x = 1.0 / d_p.values[i];
    const double y = 1.0 / d.values[i];
    sxx += x * x;
    sx += x;
    sxy += x * y;
    sy += y;
    n += 1.0;
  }
  const double grad_alpha = 2.0 * (sol.alpha * sxx + sol.beta * sx - sxy);
  const double grad_beta = 2.0 * (sol.alpha * sx + sol.beta * n - sy);
  const double scale = std::max({sxx, n, std::abs(sxy), std::abs(sy)});
  CHECK(std::abs(grad_alpha) <= 1e-9 * scale);
  CHECK(std::abs(grad_beta) <= 1e-9 * scale);
}

TEST_CASE("degenerate systems are rejected") {
  DepthMap d(8, 8, 2.0);
  DepthMap constant(8, 8, 3.0);  // 1/d_p constant
  CHECK_THROWS_AS(solve_disparity_alignment(d, constant, full_mask(8, 8)), DegenerateInputError);

  DepthMap d_p = random_depth(8, 8, 5);
  ViewMask tiny(8, 8, MaskKind::kOverlap);
  tiny.set(0, 0, true);
  CHECK_THROWS_AS(solve_disparity_alignment(d, d_p, tiny), DegenerateInputError);

  ViewMask two(8, 8, MaskKind::kOverlap);
  two.set(0, 0, true);
  two.set(5, 5, true);
  CHECK_NOTHROW(solve_disparity_alignment(d, d_p, two));
}

TEST_CASE("noise robustness: 1% disparity noise stays within 2%") {
  int pass = 0;
  for (uint32_t trial = 0; trial < 30; trial++) {
    const DepthMap d_p = random_depth(64, 64, 100 + trial);
    DepthMap d = d_p;
    std::mt19937 rng(500 + trial);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    for (size_t i = 0; i < d.values.size(); i++) {
      d.values[i] = 1.0 / ((2.0 / d_p.values[i] + 0.05) * (1.0 + noise(rng)));
    }
    const AlignmentSolution sol = solve_disparity_alignment(d, d_p, full_mask(64, 64));
    if (std::abs(sol.alpha - 2.0) / 2.0 < 0.02 && std::abs(sol.beta - 0.05) / 0.05 < 0.02) {
      pass++;
    }
  }
  CHECK(pass >= 29);
}

TEST_CASE("rectified depth identities") {
  const DepthMap d_p = random_depth(32, 32, 6);

  AlignmentSolution identity;
  const DepthMap same = rectify_depth(d_p, identity);
  for (size_t i = 0; i < d_p.values.size(); i++) {
    CHECK(same.values[i] == doctest::Approx(d_p.values[i]).epsilon(1e-15));
  }

  AlignmentSolution half;
  half.alpha = 2.0;
  half.beta = 0.0;
  DepthMap four(4, 4, 4.0);
  const DepthMap two = rectify_depth(four, half);
  CHECK(two.at(1, 1) == doctest::Approx(2.0).epsilon(1e-15));

  AlignmentSolution sol;
  sol.alpha = 1.3;
  sol.beta = 0.07;
  const DepthMap rect = rectify_depth(d_p, sol);
  for (size_t i = 0; i < rect.values.size(); i++) {
    REQUIRE(rect.valid[i] == 1);
    const double disparity = sol.alpha / d_p.values[i] + sol.beta;
    CHECK(std::abs(1.0 / rect.values[i] - disparity) < 1e-12);
  }

  // Negative disparity pixels are invalidated, not errors.
  AlignmentSolution flip;
  flip.alpha = -1.0;
  flip.beta = 0.0;
  const DepthMap gone = rectify_depth(d_p, flip);
  for (uint8_t v : gone.valid) {
    CHECK(v == 0);
  }
}

TEST_CASE("solve then rectify reaches a fixpoint") {
  const DepthMap d_p = random_depth(32, 32, 7);
  DepthMap d = d_p;
  for (size_t i = 0; i < d.values.size(); i++) {
    d.values[i] = 1.0 / (0.8 / d_p.values[i] + 0.2);
  }
  const AlignmentSolution sol = solve_disparity_alignment(d, d_p, full_mask(32, 32));
  const DepthMap rectified = rectify_depth(d_p, sol);
  const AlignmentSolution again = solve_disparity_alignment(rectified, rectified, full_mask(32, 32));
  CHECK(std::abs(again.alpha - 1.0) < 1e-7);
  CHECK(std::abs(again.beta) < 1e-7);
}

TEST_CASE("scale factor is the median ratio") {
  DepthMap d(3, 3, 1.0);
  DepthMap d_hat(3, 3, 2.0);
  CHECK(scale_factor(d, d_hat) == doctest::Approx(2.0));

  // Piecewise ratios 1.9 / 2.0 / 2.1 by thirds -> median 2.0.
  DepthMap thirds(3, 3, 1.0);
  DepthMap ratios(3, 3, 1.0);
  for (int i = 0; i < 9; i++) {
    ratios.values[i] = i < 3 ? 1.9 : (i < 6 ? 2.0 : 2.1);
  }
  CHECK(scale_factor(thirds, ratios) == doctest::Approx(2.0));

  DepthMap empty(3, 3, 1.0, false);
  CHECK_THROWS_AS(scale_factor(d, empty), DegenerateInputError);
}

TEST_CASE("gamma propagation scales every frame and keeps ratios") {
  DepthMap d(4, 4, 1.0);
  DepthMap d_hat(4, 4, 2.0);
  std::vector<DepthMap> frames = {random_depth(4, 4, 8), random_depth(4, 4, 9)};
  const std::vector<DepthMap> before = frames;
  double gamma = 0.0;
  const std::vector<DepthMap> after = scale_factor_and_propagate(d, d_hat, frames, &gamma);
  CHECK(gamma == doctest::Approx(2.0));
  for (size_t f = 0; f < after.size(); f++) {
    for (size_t i = 0; i < after[f].values.size(); i++) {
      CHECK(after[f].values[i] == doctest::Approx(2.0 * before[f].values[i]).epsilon(1e-15));
    }
  }
  for (size_t i = 0; i < after[0].values.size(); i++) {
    const double ratio_before = before[0].values[i] / before[1].values[i];
    const double ratio_after = after[0].values[i] / after[1].values[i];
    CHECK(ratio_after == doctest::Approx(ratio_before).epsilon(1e-12));
  }

  // Identity gamma leaves frames untouched.
  double one = 0.0;
  const std::vector<DepthMap> same = scale_factor_and_propagate(d, d, before, &one);
  CHECK(one == doctest::Approx(1.0));
  CHECK(same[0].values == before[0].values);
}

TEST_CASE("mask-edge smoothing: trivial cases") {
  const DepthMap input = random_depth(24, 24, 10);
  const ViewMask empty(24, 24, MaskKind::kOverlap, false);
  const DepthMap out = smooth_mask_edges(input, empty);
  CHECK(out.values == input.values);

  const ViewMask all(24, 24, MaskKind::kOverlap, true);
  CHECK(smooth_mask_edges(input, all).values == input.values);

  DepthMap constant(24, 24, 3.25);
  ViewMask half(24, 24, MaskKind::kOverlap);
  for (int y = 0; y < 24; y++) {
    for (int x = 0; x < 12; x++) {
      half.set(x, y, true);
    }
  }
  const DepthMap smooth_const = smooth_mask_edges(constant, half);
  for (size_t i = 0; i < smooth_const.values.size(); i++) {
    CHECK(std::abs(smooth_const.values[i] - 3.25) < 1e-12);
  }
}

TEST_CASE("mask-edge smoothing matches the dense convolution reference") {
  // Step edge in depth across the mask boundary.
  DepthMap input(40, 32, 1.0);
  ViewMask mask(40, 32, MaskKind::kOverlap);
  for (int y = 0; y < 32; y++) {
    for (int x = 0; x < 40; x++) {
      if (x < 20) {
        mask.set(x, y, true);
        input.set(x, y, 5.0);
      }
    }
  }
  // Scatter a few invalid pixels to exercise the renormalization rule.
  input.set_valid(18, 7, false);
  input.set_valid(21, 20, false);

  const DepthMap got = smooth_mask_edges(input, mask);
  const DepthMap want = dense_smooth_reference(input, mask);
  for (int y = 0; y < 32; y++) {
    for (int x = 0; x < 40; x++) {
      if (x >= 16 && x <= 23) {
        CHECK(std::abs(got.at(x, y) - want.at(x, y)) < 1e-9);
      } else {
        // Outside the band: bit-identical to the input.
        CHECK(got.at(x, y) == input.at(x, y));
      }
    }
  }
}

TEST_CASE("alignment JSON round trip") {
  AlignmentSolution sol;
  sol.alpha = 1.234567890123456;
  sol.beta = -0.000123;
  sol.gamma = 2.5;
  sol.residual = 3.2e-9;
  sol.pixels_used = 4096;
  const std::string json = alignment_to_json(sol);
  CHECK(json.find("\"alpha\"") < json.find("\"beta\""));
  CHECK(json.find("\"beta\"") < json.find("\"gamma\""));
  CHECK(json.find("\"residual\"") < json.find("\"pixels_used\""));
  const AlignmentSolution back = alignment_from_json(json);
  CHECK(back.alpha == sol.alpha);
  CHECK(back.beta == sol.beta);
  CHECK(back.gamma == sol.gamma);
  CHECK(back.residual == sol.residual);
  CHECK(back.pixels_used == sol.pixels_used);
}
