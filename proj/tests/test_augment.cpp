#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "posesynth/augment.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/features.hpp"
#include "posesynth/random.hpp"

using namespace posesynth;

namespace {

RasterImage noise_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(w, h);
  for (auto& p : img.pixels) p = std::uint8_t(rng.below(256));
  return img;
}

RasterImage checkerboard(int w, int h) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t c = (x + y) % 2 ? 255 : 0;
      img.set(x, y, {c, c, c});
    }
  return img;
}

double neighbour_energy(const RasterImage& img) {
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x + 1 < img.width; ++x) {
      sum += std::abs(int(img.at(x, y)[0]) - int(img.at(x + 1, y)[0]));
      ++n;
    }
  return sum / double(n);
}

Keypoints2D random_points(Rng& rng, int w, int h) {
  Keypoints2D k;
  for (auto& p : k) p = {rng.uniform(0, w - 1), rng.uniform(0, h - 1), 2};
  return k;
}

}  // namespace

TEST_CASE("augment range validation") {
  CHECK_NOTHROW(AugmentSpec{}.validate());
  AugmentSpec s;
  s.scale_min = 0.4;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.crop_min = 0.95;
  s.crop_max = 0.9;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.rotation_deg = 6;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("resolution jitter") {
  const RasterImage img = noise_image(64, 48, 1);
  CHECK(resolution_jitter(img, 1.0) == img);
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const RasterImage out = resolution_jitter(img, rng.uniform(0.5, 1.0));
    CHECK(out.width == 64);
    CHECK(out.height == 48);
  }
  const RasterImage cb = checkerboard(64, 64);
  CHECK(neighbour_energy(resolution_jitter(cb, 0.5)) < neighbour_energy(cb));
}

TEST_CASE("identity crop") {
  const RasterImage img = noise_image(40, 30, 3);
  Rng rng(3);
  const Keypoints2D k = random_points(rng, 40, 30);
  const auto a = random_crop(img, k, make_crop_window(0, 0, 1.0, 40, 30));
  CHECK(a.image == img);
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    CHECK(a.keypoints[i].x == k[i].x);
    CHECK(a.keypoints[i].y == k[i].y);
    CHECK(a.keypoints[i].v == 2);
  }
}

TEST_CASE("crop examples") {
  Keypoints2D k;
  k[0] = {5, 5, 2};
  k[1] = {100, 100, 2};
  const auto c1 = crop_keypoints(k, make_crop_window(10, 10, 0.8, 512, 512), 512, 512);
  CHECK(c1[0].v == 0);
  const auto c2 = crop_keypoints(k, make_crop_window(0, 0, 0.8, 512, 512), 512, 512);
  CHECK(std::abs(c2[1].x - 125.0) < 1e-9);
  CHECK(std::abs(c2[1].y - 125.0) < 1e-9);
  CHECK(c2[1].v == 2);
}

TEST_CASE("crop window clamping") {
  const auto w = make_crop_window(200, -3, 0.8, 512, 512);
  CHECK(w.clamped);
  CHECK(std::abs(w.x - 512 * 0.2) < 1e-9);
  CHECK(w.y == 0.0);
  CHECK_FALSE(make_crop_window(50, 50, 0.8, 512, 512).clamped);
}

TEST_CASE("crop resamples the window") {
  // Horizontal gradient: value = x. The crop maps u to window.x + u * s.
  RasterImage img(200, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 200; ++x) img.set(x, y, {std::uint8_t(x), 0, 0});
  const auto a = random_crop(img, Keypoints2D{}, make_crop_window(20, 1, 0.8, 200, 10));
  for (int u = 0; u < 200; u += 7) CHECK(int(a.image.at(u, 4)[0]) == std::lround(20 + u * 0.8));
}

TEST_CASE("micro rotation: identity and fixed point") {
  const RasterImage img = noise_image(33, 21, 4);
  Rng rng(4);
  const Keypoints2D k = random_points(rng, 33, 21);
  const auto a = micro_rotate(img, k, 0.0);
  CHECK(a.image == img);
  for (std::size_t i = 0; i < kNumKeypoints; ++i) CHECK(a.keypoints[i].x == k[i].x);

  Keypoints2D c;
  c[0] = {16, 10, 2};
  for (double phi : {-5.0, -1.3, 2.0, 5.0}) {
    const auto r = rotate_keypoints(c, phi, 33, 21);
    CHECK(std::abs(r[0].x - 16) < 1e-12);
    CHECK(std::abs(r[0].y - 10) < 1e-12);
  }
}

TEST_CASE("micro rotation keypoints match the closed form") {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const double phi = rng.uniform(-5, 5);
    const Keypoints2D k = random_points(rng, 512, 384);
    const auto r = rotate_keypoints(k, phi, 512, 384);
    const double a = phi * std::numbers::pi / 180;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      // Screen-space CCW is CW in y-down coordinates: use the flipped-y frame.
      const double X = k[i].x - 255.5, Y = -(k[i].y - 191.5);
      const double Xr = std::cos(a) * X - std::sin(a) * Y, Yr = std::sin(a) * X + std::cos(a) * Y;
      CHECK(std::abs(r[i].x - (255.5 + Xr)) < 1e-9);
      CHECK(std::abs(r[i].y - (191.5 - Yr)) < 1e-9);
    }
    const auto back = rotate_keypoints(r, -phi, 512, 384);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      CHECK(std::abs(back[i].x - k[i].x) < 1e-9);
      CHECK(std::abs(back[i].y - k[i].y) < 1e-9);
    }
  }
}

TEST_CASE("micro rotation image round trip on a smooth image") {
  RasterImage img(120, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 120; ++x) img.set(x, y, {std::uint8_t(x + y), std::uint8_t(2 * x), std::uint8_t(2 * y)});
  const auto a = micro_rotate(img, Keypoints2D{}, 5.0);
  const auto b = micro_rotate(a.image, Keypoints2D{}, -5.0);
  for (int y = 15; y < 85; ++y)
    for (int x = 15; x < 105; ++x)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(int(b.image.at(x, y)[c]) - int(img.at(x, y)[c])) <= 1);
  // Corners come from outside the source.
  CHECK(a.image.at(0, 0)[0] == 0);
}

TEST_CASE("micro rotation marks points leaving the canvas") {
  Keypoints2D k;
  k[0] = {0.2, 0.2, 2};
  const auto r = rotate_keypoints(k, 5.0, 512, 512);
  CHECK(r[0].v == 0);
}

TEST_CASE("micro rotation shifts alpha_spine by -phi") {
  Rng rng(6);
  for (int t = 0; t < 300; ++t) {
    const auto kps = fixtures::sample_annotation(int(rng.below(10)), t, 6).keypoints;
    const double phi = rng.uniform(-5, 5);
    Keypoints2D rotated = rotate_keypoints(kps, phi, 512, 512);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) rotated[i].v = kps[i].v;
    const auto q0 = geometric_quantities(kps), q1 = geometric_quantities(rotated);
    CHECK(std::abs(q1.alpha_spine - (q0.alpha_spine - phi)) < 1e-9);
    CHECK(std::abs(q1.alpha_head - q0.alpha_head) < 1e-9);
  }
}

TEST_CASE("sampled parameters stay in range and are reproducible") {
  const AugmentSpec spec;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto p = sample_augment_params(spec, 512, 512, s);
    CHECK(p.resolution >= 0.5);
    CHECK(p.resolution <= 1.0);
    CHECK(p.crop.scale >= 0.8);
    CHECK(p.crop.scale <= 1.0);
    CHECK(p.crop.x >= 0.0);
    CHECK(p.crop.x + 512 * p.crop.scale <= 512 + 1e-9);
    CHECK(std::abs(p.rotation_deg) <= 5.0);
    const auto q = sample_augment_params(spec, 512, 512, s);
    CHECK(q.rotation_deg == p.rotation_deg);
    CHECK(q.crop.x == p.crop.x);
  }
}

TEST_CASE("apply_augment keeps dimensions and agrees with the keypoint-only path") {
  const RasterImage img = noise_image(96, 64, 7);
  Rng rng(7);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Keypoints2D k = random_points(rng, 96, 64);
    const auto p = sample_augment_params(AugmentSpec{}, 96, 64, s);
    const auto a = apply_augment(img, k, p);
    CHECK(a.image.width == 96);
    CHECK(a.image.height == 64);
    const auto kk = augment_keypoints(k, p, 96, 64);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      CHECK(a.keypoints[i].x == kk[i].x);
      CHECK(a.keypoints[i].v == kk[i].v);
    }
  }
}
