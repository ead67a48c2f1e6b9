#pragma once

#include <cstdint>
#include <vector>

namespace panoscene {

/// Row-major RGB raster with float channels in [0,1] and a per-pixel
/// validity flag.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;   // height*width*3
  std::vector<uint8_t> valid;  // height*width, 0 or 1

  Image() = default;
  Image(int w, int h, float r = 0.f, float g = 0.f, float b = 0.f, bool valid_flag = true);

  size_t pixel_count() const { return size_t(width) * size_t(height); }
  float* px(int x, int y) { return &pixels[(size_t(y) * width + x) * 3]; }
  const float* px(int x, int y) const { return &pixels[(size_t(y) * width + x) * 3]; }
  bool is_valid(int x, int y) const { return valid[size_t(y) * width + x] != 0; }
  void set_valid(int x, int y, bool v) { valid[size_t(y) * width + x] = v ? 1 : 0; }
};

enum class MaskKind {
  kInpaintRegion,
  kOverlap,
  kOcclusion,
  kBounds,
};

/// Binary mask annotating an image of the same dimensions.
struct ViewMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;  // 0 or 1
  MaskKind kind = MaskKind::kInpaintRegion;

  ViewMask() = default;
  ViewMask(int w, int h, MaskKind k, bool fill = false);

  bool at(int x, int y) const { return bits[size_t(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[size_t(y) * width + x] = v ? 1 : 0; }
  size_t popcount() const;
};

/// Per-pixel scene depth in world units, measured as Euclidean distance from
/// the camera center along the pixel ray. Values are positive where valid.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h, double value = 0.0, bool valid_flag = true);

  double at(int x, int y) const { return values[size_t(y) * width + x]; }
  void set(int x, int y, double v) { values[size_t(y) * width + x] = v; }
  bool is_valid(int x, int y) const { return valid[size_t(y) * width + x] != 0; }
  void set_valid(int x, int y, bool v) { valid[size_t(y) * width + x] = v ? 1 : 0; }
};

/// A full 360x180 panorama in equirectangular projection; width is always
/// twice the height.
struct EquirectImage {
  Image image;

  EquirectImage() = default;
  /// Throws ParameterError unless the image is 2:1.
  explicit EquirectImage(Image img);

  int width() const { return image.width; }
  int height() const { return image.height; }
};

/// Snaps every valid pixel to the nearest 8-bit level (k/255). Images cross
/// the plugin wire as 8-bit PNG, so the orchestrator normalizes to that grid
/// before any plugin call; the unchanged-outside-mask contract is then exact
/// for stub and remote backends alike.
void quantize_to_8bit(Image& image);

/// Box-filter downsample by an integer factor; used when a super-resolved
/// view is warped forward at working resolution.
Image area_downsample(const Image& src, int factor);

/// Bilinear upscale by an integer factor (the stub super-resolver).
Image bilinear_upscale(const Image& src, int factor);

bool images_equal(const Image& a, const Image& b);

}  // namespace panoscene
