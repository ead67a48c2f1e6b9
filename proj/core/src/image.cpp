#include "panoscene/image.hpp"

#include <cmath>

#include "panoscene/errors.hpp"

namespace panoscene {

Image::Image(int w, int h, float r, float g, float b, bool valid_flag)
    : width(w), height(h), pixels(size_t(w) * h * 3), valid(size_t(w) * h, valid_flag ? 1 : 0) {
  if (w < 0 || h < 0) {
    throw ParameterError("image dimensions must be non-negative");
  }
  for (size_t i = 0; i < pixel_count(); i++) {
    pixels[3 * i] = r;
    pixels[3 * i + 1] = g;
    pixels[3 * i + 2] = b;
  }
}

ViewMask::ViewMask(int w, int h, MaskKind k, bool fill)
    : width(w), height(h), bits(size_t(w) * h, fill ? 1 : 0), kind(k) {
  if (w < 0 || h < 0) {
    throw ParameterError("mask dimensions must be non-negative");
  }
}

size_t ViewMask::popcount() const {
  size_t n = 0;
  for (uint8_t b : bits) {
    n += b != 0;
  }
  return n;
}

DepthMap::DepthMap(int w, int h, double value, bool valid_flag)
    : width(w), height(h), values(size_t(w) * h, value), valid(size_t(w) * h, valid_flag ? 1 : 0) {
  if (w < 0 || h < 0) {
    throw ParameterError("depth dimensions must be non-negative");
  }
}

EquirectImage::EquirectImage(Image img) : image(std::move(img)) {
  if (image.width != 2 * image.height) {
    throw ParameterError("equirectangular image must be 2:1, got " + std::to_string(image.width) +
                         "x" + std::to_string(image.height));
  }
}

void quantize_to_8bit(Image& image) {
  for (float& v : image.pixels) {
    const float clamped = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    v = std::round(clamped * 255.f) / 255.f;
  }
}

Image area_downsample(const Image& src, int factor) {
  if (factor < 1 || src.width % factor != 0 || src.height % factor != 0) {
    throw ParameterError("area_downsample: dimensions not divisible by factor");
  }
  Image out(src.width / factor, src.height / factor);
  const double inv = 1.0 / (double(factor) * factor);
  for (int y = 0; y < out.height; y++) {
    for (int x = 0; x < out.width; x++) {
      double acc[3] = {0, 0, 0};
      bool all_valid = true;
      for (int dy = 0; dy < factor; dy++) {
        for (int dx = 0; dx < factor; dx++) {
          const float* p = src.px(x * factor + dx, y * factor + dy);
          acc[0] += p[0];
          acc[1] += p[1];
          acc[2] += p[2];
          all_valid = all_valid && src.is_valid(x * factor + dx, y * factor + dy);
        }
      }
      float* q = out.px(x, y);
      q[0] = float(acc[0] * inv);
      q[1] = float(acc[1] * inv);
      q[2] = float(acc[2] * inv);
      out.set_valid(x, y, all_valid);
    }
  }
  return out;
}

Image bilinear_upscale(const Image& src, int factor) {
  if (factor < 1) {
    throw ParameterError("bilinear_upscale: factor must be >= 1");
  }
  Image out(src.width * factor, src.height * factor);
  for (int y = 0; y < out.height; y++) {
    // Pixel-center mapping: destination center (y+0.5)/factor lands in source
    // index space at (y+0.5)/factor - 0.5.
    const double sy = (y + 0.5) / factor - 0.5;
    const int y0 = int(std::floor(sy));
    const double fy = sy - y0;
    const int yc0 = std::min(std::max(y0, 0), src.height - 1);
    const int yc1 = std::min(std::max(y0 + 1, 0), src.height - 1);
    for (int x = 0; x < out.width; x++) {
      const double sx = (x + 0.5) / factor - 0.5;
      const int x0 = int(std::floor(sx));
      const double fx = sx - x0;
      const int xc0 = std::min(std::max(x0, 0), src.width - 1);
      const int xc1 = std::min(std::max(x0 + 1, 0), src.width - 1);
      const float* p00 = src.px(xc0, yc0);
      const float* p10 = src.px(xc1, yc0);
      const float* p01 = src.px(xc0, yc1);
      const float* p11 = src.px(xc1, yc1);
      float* q = out.px(x, y);
      for (int c = 0; c < 3; c++) {
        const double top = p00[c] * (1.0 - fx) + p10[c] * fx;
        const double bot = p01[c] * (1.0 - fx) + p11[c] * fx;
        q[c] = float(top * (1.0 - fy) + bot * fy);
      }
      out.set_valid(x, y, src.is_valid(xc0, yc0) && src.is_valid(xc1, yc0) &&
                              src.is_valid(xc0, yc1) && src.is_valid(xc1, yc1));
    }
  }
  return out;
}

bool images_equal(const Image& a, const Image& b) {
  return a.width == b.width && a.height == b.height && a.pixels == b.pixels && a.valid == b.valid;
}

}  // namespace panoscene
