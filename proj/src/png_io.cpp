#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "posesynth/errors.hpp"
#include "posesynth/random.hpp"
#include "posesynth/raster.hpp"

namespace posesynth {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  if (mode[0] == 'w' && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth, int color_type,
                const std::vector<png_bytep>& rows) {
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads into 8-bit RGB or 16-bit gray depending on `want16`.
void read_rows(const std::filesystem::path& path, bool want16, int& width, int& height,
               std::vector<std::uint8_t>& out) {
  File f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decode failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  width = int(png_get_image_width(png, info));
  height = int(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int type = png_get_color_type(png, info);
  if (want16) {
    if (type != PNG_COLOR_TYPE_GRAY || depth != 16) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw IoError(path.string() + ": expected a 16-bit grayscale PNG");
    }
  } else {
    if (depth == 16) png_set_strip_16(png);
    if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_packing(png);
  }
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.assign(stride * std::size_t(height), 0);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[std::size_t(y)] = out.data() + stride * std::size_t(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

std::uint64_t content_hash(const RasterImage& img) {
  const std::int32_t dims[2] = {img.width, img.height};
  return fnv1a64(img.pixels.data(), img.pixels.size(), fnv1a64(dims, sizeof dims));
}

std::uint64_t content_hash(const DepthMap& depth) {
  const std::int32_t dims[2] = {depth.width, depth.height};
  std::uint64_t h = fnv1a64(dims, sizeof dims);
  for (std::uint16_t v : depth.values) {
    const std::uint8_t bytes[2] = {std::uint8_t(v >> 8), std::uint8_t(v & 0xff)};
    h = fnv1a64(bytes, 2, h);
  }
  return h;
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  if (!img.valid()) throw IoError("refusing to write an invalid raster to " + path.string());
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[std::size_t(y)] = const_cast<png_bytep>(img.at(0, y));
  write_rows(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

RasterImage read_png_rgb(const std::filesystem::path& path) {
  RasterImage img;
  read_rows(path, false, img.width, img.height, img.pixels);
  return img;
}

void write_png(const DepthMap& depth, const std::filesystem::path& path) {
  // PNG stores 16-bit samples big-endian.
  std::vector<std::uint8_t> bytes(depth.values.size() * 2);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    bytes[2 * i] = std::uint8_t(depth.values[i] >> 8);
    bytes[2 * i + 1] = std::uint8_t(depth.values[i] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(depth.height));
  for (int y = 0; y < depth.height; ++y) rows[std::size_t(y)] = &bytes[std::size_t(y) * depth.width * 2];
  write_rows(path, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

DepthMap read_png_depth(const std::filesystem::path& path, double near_m, double far_m) {
  int w = 0, h = 0;
  std::vector<std::uint8_t> bytes;
  read_rows(path, true, w, h, bytes);
  DepthMap d(w, h, near_m, far_m);
  for (std::size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = std::uint16_t((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  return d;
}

}  // namespace posesynth
