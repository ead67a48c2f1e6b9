#include "panoscene/depth_align.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "panoscene/errors.hpp"
#include "panoscene/json_writer.hpp"

namespace panoscene {

namespace {

void check_dims(const DepthMap& a, const DepthMap& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw ParameterError(std::string(what) + ": depth dimensions differ");
  }
}

double median_of(std::vector<double>& values) {
  const size_t n = values.size();
  std::sort(values.begin(), values.end());
  if (n % 2 == 1) {
    return values[n / 2];
  }
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

AlignmentSolution solve_disparity_alignment(const DepthMap& d, const DepthMap& d_p,
                                            const ViewMask& mask) {
  check_dims(d, d_p, "solve_disparity_alignment");
  if (mask.width != d.width || mask.height != d.height) {
    throw ParameterError("solve_disparity_alignment: mask dimensions differ");
  }

  double sxx = 0.0, sx = 0.0, sxy = 0.0, sy = 0.0;
  size_t n = 0;
  const size_t total = d.values.size();
  for (size_t i = 0; i < total; i++) {
    if (!mask.bits[i] || !d.valid[i] || !d_p.valid[i]) {
      continue;
    }
    if (!(d.values[i] > 0.0) || !(d_p.values[i] > 0.0)) {
      continue;
    }
    const double x = 1.0 / d_p.values[i];
    const double y = 1.0 / d.values[i];
    sxx += x * x;
    sx += x;
    sxy += x * y;
    sy += y;
    n++;
  }

  if (n < 2) {
    throw DegenerateInputError("disparity alignment needs at least 2 masked valid pixels, got " +
                               std::to_string(n));
  }
  const double det = double(n) * sxx - sx * sx;
  if (!(det > 1e-12 * double(n) * sxx)) {
    throw DegenerateInputError("disparity alignment is degenerate: 1/d_p is constant on the mask");
  }

  AlignmentSolution sol;
  sol.alpha = (double(n) * sxy - sx * sy) / det;
  sol.beta = (sxx * sy - sx * sxy) / det;
  sol.pixels_used = n;

  double sq = 0.0;
  std::vector<double> ratios;
  ratios.reserve(n);
  for (size_t i = 0; i < total; i++) {
    if (!mask.bits[i] || !d.valid[i] || !d_p.valid[i]) {
      continue;
    }
    if (!(d.values[i] > 0.0) || !(d_p.values[i] > 0.0)) {
      continue;
    }
    const double x = 1.0 / d_p.values[i];
    const double y = 1.0 / d.values[i];
    const double r = sol.alpha * x + sol.beta - y;
    sq += r * r;
    const double disp = sol.alpha * x + sol.beta;
    if (disp > kDisparityFloor) {
      ratios.push_back((1.0 / disp) * y);  // d_hat / d
    }
  }
  sol.residual = sq / double(n);
  sol.gamma = ratios.empty() ? 1.0 : median_of(ratios);
  return sol;
}

DepthMap rectify_depth(const DepthMap& d_p, const AlignmentSolution& sol) {
  DepthMap out(d_p.width, d_p.height, 0.0, false);
  for (size_t i = 0; i < d_p.values.size(); i++) {
    if (!d_p.valid[i] || !(d_p.values[i] > 0.0)) {
      continue;
    }
    const double disp = sol.alpha / d_p.values[i] + sol.beta;
    if (disp > kDisparityFloor) {
      out.values[i] = 1.0 / disp;
      out.valid[i] = 1;
    }
  }
  return out;
}

double scale_factor(const DepthMap& d, const DepthMap& d_hat) {
  check_dims(d, d_hat, "scale_factor");
  std::vector<double> ratios;
  for (size_t i = 0; i < d.values.size(); i++) {
    if (d.valid[i] && d_hat.valid[i] && d.values[i] > 0.0) {
      ratios.push_back(d_hat.values[i] / d.values[i]);
    }
  }
  if (ratios.empty()) {
    throw DegenerateInputError("scale_factor: no overlapping valid depth pixels");
  }
  return median_of(ratios);
}

std::vector<DepthMap> scale_factor_and_propagate(const DepthMap& d, const DepthMap& d_hat,
                                                 std::vector<DepthMap> frames, double* gamma_out) {
  const double gamma = scale_factor(d, d_hat);
  if (gamma_out != nullptr) {
    *gamma_out = gamma;
  }
  for (DepthMap& frame : frames) {
    for (double& v : frame.values) {
      v *= gamma;
    }
  }
  return frames;
}

DepthMap smooth_mask_edges(const DepthMap& d_hat, const ViewMask& mask) {
  if (mask.width != d_hat.width || mask.height != d_hat.height) {
    throw ParameterError("smooth_mask_edges: mask dimensions differ");
  }
  const int w = d_hat.width;
  const int h = d_hat.height;
  DepthMap out = d_hat;

  constexpr int kRadius = 3;
  constexpr double kSigma = 1.4;
  double kernel[2 * kRadius + 1][2 * kRadius + 1];
  for (int dy = -kRadius; dy <= kRadius; dy++) {
    for (int dx = -kRadius; dx <= kRadius; dx++) {
      kernel[dy + kRadius][dx + kRadius] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
    }
  }

  for (int y = 0; y < h; y++) {
    for (int x = 0; x < w; x++) {
      // Band membership: a pixel on the other side of the mask lies within
      // Chebyshev distance 3, i.e. 3 px on each side of the boundary.
      const bool m = mask.at(x, y);
      bool in_band = false;
      for (int dy = -kRadius; dy <= kRadius && !in_band; dy++) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) {
          continue;
        }
        for (int dx = -kRadius; dx <= kRadius; dx++) {
          const int nx = x + dx;
          if (nx >= 0 && nx < w && mask.at(nx, ny) != m) {
            in_band = true;
            break;
          }
        }
      }
      if (!in_band) {
        continue;
      }
      double acc = 0.0;
      double weight = 0.0;
      for (int dy = -kRadius; dy <= kRadius; dy++) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) {
          continue;
        }
        for (int dx = -kRadius; dx <= kRadius; dx++) {
          const int nx = x + dx;
          if (nx < 0 || nx >= w || !d_hat.is_valid(nx, ny)) {
            continue;
          }
          const double k = kernel[dy + kRadius][dx + kRadius];
          acc += k * d_hat.at(nx, ny);
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

std::string alignment_to_json(const AlignmentSolution& sol) {
  JsonWriter w;
  w.begin_object();
  w.key("alpha").value(sol.alpha);
  w.key("beta").value(sol.beta);
  w.key("gamma").value(sol.gamma);
  w.key("residual").value(sol.residual);
  w.key("pixels_used").value(sol.pixels_used);
  w.end_object();
  return w.str();
}

AlignmentSolution alignment_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("alignment JSON parse error: ") + e.what());
  }
  AlignmentSolution sol;
  sol.alpha = j.at("alpha").get<double>();
  sol.beta = j.at("beta").get<double>();
  sol.gamma = j.at("gamma").get<double>();
  sol.residual = j.at("residual").get<double>();
  sol.pixels_used = j.at("pixels_used").get<size_t>();
  return sol;
}

}  // namespace panoscene
