#include "panoscene/png_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <vector>

#include "panoscene/errors.hpp"

namespace panoscene {

namespace {

struct MemoryReader {
  const std::string* bytes;
  size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  MemoryReader* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->offset + len > r->bytes->size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, r->bytes->data() + r->offset, len);
  r->offset += len;
}

void png_write_to_memory(png_structp png, png_bytep data, png_size_t len) {
  std::string* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void png_flush_noop(png_structp) {}

uint8_t to_byte(float v) {
  const float clamped = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return uint8_t(std::lround(clamped * 255.f));
}

std::string encode_gray_or_rgb(const uint8_t* data, int width, int height, int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    throw Error("libpng: failed to create write struct");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: failed to create info struct");
  }

  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng: write failed");
  }
  png_set_write_fn(png, &out, png_write_to_memory, png_flush_noop);
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; y++) {
    rows[y] = const_cast<png_bytep>(data + size_t(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> data;
};

DecodedPng decode(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8)) {
    throw ParameterError("not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    throw Error("libpng: failed to create read struct");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng: failed to create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParameterError("libpng: corrupt PNG stream");
  }

  MemoryReader reader{&bytes, 0};
  png_set_read_fn(png, &reader, png_read_from_memory);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  // Normalize everything to 8-bit gray or RGB.
  if (bit_depth == 16) {
    png_set_strip_16(png);
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_tRNS_to_alpha(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParameterError("unsupported PNG channel count");
  }

  DecodedPng out;
  out.width = int(width);
  out.height = int(height);
  out.channels = channels;
  out.data.resize(size_t(width) * height * channels);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; y++) {
    rows[y] = out.data.data() + size_t(y) * width * channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingInputError("cannot open file: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParameterError("cannot open file for writing: " + path);
  }
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) {
    throw ParameterError("failed writing file: " + path);
  }
}

}  // namespace

std::string encode_png(const Image& image) {
  std::vector<uint8_t> rgb(size_t(image.width) * image.height * 3);
  for (size_t i = 0; i < image.pixel_count(); i++) {
    rgb[3 * i] = to_byte(image.pixels[3 * i]);
    rgb[3 * i + 1] = to_byte(image.pixels[3 * i + 1]);
    rgb[3 * i + 2] = to_byte(image.pixels[3 * i + 2]);
  }
  return encode_gray_or_rgb(rgb.data(), image.width, image.height, 3);
}

Image decode_png(const std::string& bytes) {
  const DecodedPng d = decode(bytes);
  Image image(d.width, d.height);
  for (size_t i = 0; i < image.pixel_count(); i++) {
    if (d.channels == 1) {
      const float v = d.data[i] / 255.f;
      image.pixels[3 * i] = v;
      image.pixels[3 * i + 1] = v;
      image.pixels[3 * i + 2] = v;
    } else {
      image.pixels[3 * i] = d.data[3 * i] / 255.f;
      image.pixels[3 * i + 1] = d.data[3 * i + 1] / 255.f;
      image.pixels[3 * i + 2] = d.data[3 * i + 2] / 255.f;
    }
  }
  return image;
}

void write_png(const std::string& path, const Image& image) {
  write_file(path, encode_png(image));
}

Image read_png(const std::string& path) {
  return decode_png(read_file(path));
}

std::string encode_mask_png(const ViewMask& mask) {
  std::vector<uint8_t> gray(mask.bits.size());
  for (size_t i = 0; i < mask.bits.size(); i++) {
    gray[i] = mask.bits[i] ? 255 : 0;
  }
  return encode_gray_or_rgb(gray.data(), mask.width, mask.height, 1);
}

ViewMask decode_mask_png(const std::string& bytes, MaskKind kind) {
  const DecodedPng d = decode(bytes);
  if (d.channels != 1) {
    throw ParameterError("mask PNG must be grayscale");
  }
  ViewMask mask(d.width, d.height, kind);
  for (size_t i = 0; i < d.data.size(); i++) {
    mask.bits[i] = d.data[i] >= 128 ? 1 : 0;
  }
  return mask;
}

void write_mask_png(const std::string& path, const ViewMask& mask) {
  write_file(path, encode_mask_png(mask));
}

ViewMask read_mask_png(const std::string& path, MaskKind kind) {
  return decode_mask_png(read_file(path), kind);
}

}  // namespace panoscene
