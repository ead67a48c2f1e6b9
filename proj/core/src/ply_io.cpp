#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "panoscene/errors.hpp"
#include "panoscene/point_cloud.hpp"

namespace panoscene {

namespace {

struct Segment {
  SourceTag tag;
  size_t start = 0;
  size_t count = 0;
};

std::vector<Segment> tag_runs(const PointCloud& cloud) {
  std::vector<Segment> runs;
  for (size_t i = 0; i < cloud.size(); i++) {
    if (runs.empty() || !(runs.back().tag == cloud.tags[i])) {
      runs.push_back({cloud.tags[i], i, 1});
    } else {
      runs.back().count++;
    }
  }
  return runs;
}

uint8_t to_byte(float c) {
  const float clamped = c < 0.f ? 0.f : (c > 1.f ? 1.f : c);
  return uint8_t(std::lround(clamped * 255.f));
}

}  // namespace

void write_ply(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open PLY for writing: " + path);
  }
  const std::vector<Segment> runs = tag_runs(cloud);
  const std::string source =
      runs.size() == 1 ? to_string(runs.front().tag) : std::string("fused");

  out << "ply\n";
  out << "format binary_little_endian 1.0\n";
  out << "comment source=" << source << "\n";
  for (const Segment& s : runs) {
    out << "comment segment=" << to_string(s.tag) << ":" << s.start << ":" << s.count << "\n";
  }
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\n";
  out << "property float y\n";
  out << "property float z\n";
  out << "property uchar red\n";
  out << "property uchar green\n";
  out << "property uchar blue\n";
  out << "end_header\n";

  for (size_t i = 0; i < cloud.size(); i++) {
    const float xyz[3] = {float(cloud.positions[i].x()), float(cloud.positions[i].y()),
                          float(cloud.positions[i].z())};
    const uint8_t rgb[3] = {to_byte(cloud.colors[i].x()), to_byte(cloud.colors[i].y()),
                            to_byte(cloud.colors[i].z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    out.write(reinterpret_cast<const char*>(rgb), sizeof(rgb));
  }
  if (!out) {
    throw ParameterError("failed writing PLY: " + path);
  }
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingInputError("cannot open PLY: " + path);
  }

  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw ParameterError("not a PLY file: " + path);
  }

  size_t vertex_count = 0;
  std::vector<Segment> segments;
  SourceTag default_tag{SourceKind::kPanorama, -1};
  std::vector<std::string> properties;
  bool little_endian = false;

  while (std::getline(in, line)) {
    if (line == "end_header") {
      break;
    }
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      little_endian = fmt == "binary_little_endian";
    } else if (word == "comment") {
      std::string rest;
      std::getline(ss, rest);
      if (!rest.empty() && rest.front() == ' ') {
        rest.erase(rest.begin());
      }
      if (rest.rfind("source=", 0) == 0) {
        const std::string tag = rest.substr(7);
        if (tag != "fused") {
          default_tag = source_tag_from_string(tag);
        }
      } else if (rest.rfind("segment=", 0) == 0) {
        const std::string body = rest.substr(8);
        const size_t c1 = body.rfind(':');
        const size_t c0 = body.rfind(':', c1 - 1);
        if (c0 == std::string::npos || c1 == std::string::npos) {
          throw ParameterError("malformed segment comment in PLY");
        }
        Segment seg;
        seg.tag = source_tag_from_string(body.substr(0, c0));
        seg.start = std::stoull(body.substr(c0 + 1, c1 - c0 - 1));
        seg.count = std::stoull(body.substr(c1 + 1));
        segments.push_back(seg);
      }
    } else if (word == "element") {
      std::string kind;
      ss >> kind >> vertex_count;
      if (kind != "vertex") {
        throw ParameterError("unsupported PLY element: " + kind);
      }
    } else if (word == "property") {
      std::string type, name;
      ss >> type >> name;
      properties.push_back(type + " " + name);
    }
  }

  if (!little_endian) {
    throw ParameterError("PLY must be binary little-endian: " + path);
  }
  const std::vector<std::string> expected = {"float x",  "float y",     "float z",
                                             "uchar red", "uchar green", "uchar blue"};
  if (properties != expected) {
    throw ParameterError("unsupported PLY vertex layout: " + path);
  }

  PointCloud cloud;
  cloud.positions.reserve(vertex_count);
  for (size_t i = 0; i < vertex_count; i++) {
    float xyz[3];
    uint8_t rgb[3];
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    in.read(reinterpret_cast<char*>(rgb), sizeof(rgb));
    if (!in) {
      throw ParameterError("truncated PLY payload: " + path);
    }
    cloud.append({xyz[0], xyz[1], xyz[2]},
                 {rgb[0] / 255.f, rgb[1] / 255.f, rgb[2] / 255.f}, default_tag);
  }
  for (const Segment& seg : segments) {
    if (seg.start + seg.count > cloud.size()) {
      throw ParameterError("segment comment out of range in PLY");
    }
    for (size_t i = 0; i < seg.count; i++) {
      cloud.tags[seg.start + i] = seg.tag;
    }
  }
  return cloud;
}

}  // namespace panoscene
