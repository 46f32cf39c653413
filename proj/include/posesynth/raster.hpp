#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace posesynth {

using Rgb = std::array<std::uint8_t, 3>;

// Row-major RGB8.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RasterImage() = default;
  RasterImage(int w, int h) : width(w), height(h), pixels(std::size_t(3) * w * h, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(std::size_t(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &pixels[(std::size_t(y) * width + x) * 3]; }
  void set(int x, int y, const Rgb& c) {
    std::uint8_t* p = at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  bool valid() const { return width > 0 && height > 0 && pixels.size() == std::size_t(3) * width * height; }
  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// 16-bit depth; 0 is `near_m`, 65535 is `far_m` and also marks background.
struct DepthMap {
  int width = 0;
  int height = 0;
  double near_m = 0.2;
  double far_m = 2.0;
  std::vector<std::uint16_t> values;

  DepthMap() = default;
  DepthMap(int w, int h, double near, double far)
      : width(w), height(h), near_m(near), far_m(far), values(std::size_t(w) * h, kBackground) {}

  static constexpr std::uint16_t kBackground = 65535;

  std::uint16_t& at(int x, int y) { return values[std::size_t(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return values[std::size_t(y) * width + x]; }
  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

// FNV-1a over dimensions and pixel data, independent of PNG encoding.
std::uint64_t content_hash(const RasterImage& img);
std::uint64_t content_hash(const DepthMap& depth);

void write_png(const RasterImage& img, const std::filesystem::path& path);
RasterImage read_png_rgb(const std::filesystem::path& path);
void write_png(const DepthMap& depth, const std::filesystem::path& path);
// near/far are not stored in the PNG; the caller supplies them.
DepthMap read_png_depth(const std::filesystem::path& path, double near_m, double far_m);

}  // namespace posesynth
