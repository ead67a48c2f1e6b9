#pragma once

#include <string>

#include "panoscene/image.hpp"

namespace panoscene {

// 8-bit PNG. Float channels are quantized with round(clamp01(v) * 255) on
// write and mapped back as v / 255 on read, so values already on the 8-bit
// grid round-trip exactly.

void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

std::string encode_png(const Image& image);
Image decode_png(const std::string& bytes);

/// Masks and validity maps as 8-bit grayscale, 0 or 255.
void write_mask_png(const std::string& path, const ViewMask& mask);
ViewMask read_mask_png(const std::string& path, MaskKind kind);
std::string encode_mask_png(const ViewMask& mask);
ViewMask decode_mask_png(const std::string& bytes, MaskKind kind);

}  // namespace panoscene
