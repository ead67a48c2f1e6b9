#include "panoscene/pfm_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "panoscene/errors.hpp"

namespace panoscene {

std::string encode_pfm(const DepthMap& depth) {
  std::ostringstream out;
  out << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  for (int y = depth.height - 1; y >= 0; y--) {
    for (int x = 0; x < depth.width; x++) {
      const float v = depth.is_valid(x, y) ? float(depth.at(x, y)) : 0.f;
      char bytes[4];
      std::memcpy(bytes, &v, 4);
      out.write(bytes, 4);
    }
  }
  return out.str();
}

DepthMap decode_pfm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  if (magic != "Pf") {
    throw ParameterError("PFM: expected grayscale 'Pf' header");
  }
  int width = 0, height = 0;
  double scale = 0.0;
  in >> width >> height >> scale;
  if (width <= 0 || height <= 0) {
    throw ParameterError("PFM: invalid dimensions");
  }
  if (!(scale < 0.0)) {
    throw ParameterError("PFM: only little-endian (negative scale) is supported");
  }
  in.get();  // single whitespace after the scale line

  DepthMap depth(width, height, 0.0, false);
  const size_t payload = size_t(width) * height * 4;
  std::string data(payload, '\0');
  in.read(data.data(), std::streamsize(payload));
  if (in.gcount() != std::streamsize(payload)) {
    throw ParameterError("PFM: truncated payload");
  }
  size_t offset = 0;
  for (int y = height - 1; y >= 0; y--) {
    for (int x = 0; x < width; x++) {
      float v;
      std::memcpy(&v, data.data() + offset, 4);
      offset += 4;
      if (v > 0.f) {
        depth.set(x, y, v);
        depth.set_valid(x, y, true);
      }
    }
  }
  return depth;
}

void write_pfm(const std::string& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open PFM for writing: " + path);
  }
  const std::string bytes = encode_pfm(depth);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) {
    throw ParameterError("failed writing PFM: " + path);
  }
}

DepthMap read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingInputError("cannot open PFM: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pfm(bytes);
}

}  // namespace panoscene
