#pragma once

#include <string>

#include "panoscene/image.hpp"

namespace panoscene {

// Grayscale PFM ("Pf" header, float32, negative scale = little-endian, rows
// stored bottom to top). Invalid pixels are written as 0 and any value <= 0
// reads back as invalid.

void write_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_pfm(const std::string& path);

std::string encode_pfm(const DepthMap& depth);
DepthMap decode_pfm(const std::string& bytes);

}  // namespace panoscene
