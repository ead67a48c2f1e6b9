#pragma once

#include <string>

namespace panoscene {

std::string base64_encode(const std::string& bytes);

/// Throws ParameterError on malformed input.
std::string base64_decode(const std::string& text);

}  // namespace panoscene
