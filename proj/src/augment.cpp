#include "posesynth/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "posesynth/errors.hpp"
#include "posesynth/random.hpp"

namespace posesynth {

namespace {

// Neighbours outside the image contribute black.
std::array<double, 3> sample_bilinear(const RasterImage& img, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = int(fx), y0 = int(fy);
  const double ax = x - fx, ay = y - fy;
  std::array<double, 3> out{};
  const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0 || xs[k] < 0 || ys[k] < 0 || xs[k] >= img.width || ys[k] >= img.height) continue;
    const std::uint8_t* p = img.at(xs[k], ys[k]);
    for (int c = 0; c < 3; ++c) out[c] += w[k] * p[c];
  }
  return out;
}

void store(RasterImage& img, int x, int y, const std::array<double, 3>& v) {
  std::uint8_t* p = img.at(x, y);
  for (int c = 0; c < 3; ++c) p[c] = std::uint8_t(std::clamp(std::lround(v[c]), 0L, 255L));
}

// Center-aligned resize; source coordinates are clamped to the edge pixels.
RasterImage resize_bilinear(const RasterImage& img, int w, int h) {
  RasterImage out(w, h);
  const double sx = double(img.width) / w, sy = double(img.height) / h;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double x = std::clamp((u + 0.5) * sx - 0.5, 0.0, double(img.width - 1));
      const double y = std::clamp((v + 0.5) * sy - 0.5, 0.0, double(img.height - 1));
      store(out, u, v, sample_bilinear(img, x, y));
    }
  return out;
}

void mark_out_of_frame(Keypoints2D& kps, int width, int height) {
  for (auto& k : kps)
    if (!in_frame(k.x, k.y, width, height)) k.v = 0;
}

}  // namespace

void AugmentSpec::validate() const {
  auto check = [](double lo, double hi, double min, double max, const char* what) {
    if (!(lo <= hi && lo >= min && hi <= max))
      throw ConfigError(std::string("augment ") + what + " range must be ordered within [" + std::to_string(min) +
                        ", " + std::to_string(max) + "]");
  };
  check(scale_min, scale_max, 0.5, 1.0, "resolution");
  check(crop_min, crop_max, 0.8, 1.0, "crop");
  check(0.0, rotation_deg, 0.0, 5.0, "rotation");
}

RasterImage resolution_jitter(const RasterImage& img, double r) {
  if (r == 1.0) return img;
  const int w = std::max(1, int(std::lround(img.width * r)));
  const int h = std::max(1, int(std::lround(img.height * r)));
  return resize_bilinear(resize_bilinear(img, w, h), img.width, img.height);
}

CropWindow make_crop_window(double x, double y, double scale, int width, int height) {
  CropWindow c{x, y, scale, false};
  const double max_x = width * (1.0 - scale), max_y = height * (1.0 - scale);
  const double cx = std::clamp(x, 0.0, std::max(0.0, max_x));
  const double cy = std::clamp(y, 0.0, std::max(0.0, max_y));
  c.clamped = cx != x || cy != y;
  c.x = cx;
  c.y = cy;
  return c;
}

Keypoints2D crop_keypoints(const Keypoints2D& kps, const CropWindow& window, int width, int height) {
  Keypoints2D out = kps;
  for (auto& k : out) {
    k.x = (k.x - window.x) / window.scale;
    k.y = (k.y - window.y) / window.scale;
  }
  mark_out_of_frame(out, width, height);
  return out;
}

Augmented random_crop(const RasterImage& img, const Keypoints2D& kps, const CropWindow& window) {
  Augmented a{RasterImage(img.width, img.height), crop_keypoints(kps, window, img.width, img.height)};
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      const double x = std::min(window.x + u * window.scale, double(img.width - 1));
      const double y = std::min(window.y + v * window.scale, double(img.height - 1));
      store(a.image, u, v, sample_bilinear(img, x, y));
    }
  return a;
}

Keypoints2D rotate_keypoints(const Keypoints2D& kps, double phi_deg, int width, int height) {
  const double phi = phi_deg * std::numbers::pi / 180.0;
  const double c = std::cos(phi), s = std::sin(phi);
  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  Keypoints2D out = kps;
  for (auto& k : out) {
    const double dx = k.x - cx, dy = k.y - cy;
    k.x = cx + c * dx + s * dy;
    k.y = cy - s * dx + c * dy;
  }
  mark_out_of_frame(out, width, height);
  return out;
}

Augmented micro_rotate(const RasterImage& img, const Keypoints2D& kps, double phi_deg) {
  if (phi_deg == 0.0) return {img, kps};
  Augmented a{RasterImage(img.width, img.height), rotate_keypoints(kps, phi_deg, img.width, img.height)};
  const double phi = phi_deg * std::numbers::pi / 180.0;
  const double c = std::cos(phi), s = std::sin(phi);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      // Inverse of the forward map.
      const double dx = u - cx, dy = v - cy;
      store(a.image, u, v, sample_bilinear(img, cx + c * dx - s * dy, cy + s * dx + c * dy));
    }
  return a;
}

AugmentParams sample_augment_params(const AugmentSpec& spec, int width, int height, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  AugmentParams p;
  p.resolution = rng.uniform(spec.scale_min, spec.scale_max);
  const double s = rng.uniform(spec.crop_min, spec.crop_max);
  const double ox = rng.uniform(0.0, width * (1.0 - s));
  const double oy = rng.uniform(0.0, height * (1.0 - s));
  p.crop = make_crop_window(ox, oy, s, width, height);
  p.rotation_deg = rng.uniform(-spec.rotation_deg, spec.rotation_deg);
  return p;
}

Augmented apply_augment(const RasterImage& img, const Keypoints2D& kps, const AugmentParams& p) {
  Augmented a = random_crop(img, kps, p.crop);
  a = micro_rotate(a.image, a.keypoints, p.rotation_deg);
  a.image = resolution_jitter(a.image, p.resolution);
  return a;
}

Keypoints2D augment_keypoints(const Keypoints2D& kps, const AugmentParams& p, int width, int height) {
  return rotate_keypoints(crop_keypoints(kps, p.crop, width, height), p.rotation_deg, width, height);
}

ojson params_to_json(const AugmentParams& p) {
  ojson j;
  j["resolution"] = p.resolution;
  j["crop"] = {{"x", p.crop.x}, {"y", p.crop.y}, {"scale", p.crop.scale}, {"clamped", p.crop.clamped}};
  j["rotation_deg"] = p.rotation_deg;
  return j;
}

}  // namespace posesynth
