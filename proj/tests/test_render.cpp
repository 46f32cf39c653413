#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "posesynth/random.hpp"
#include "posesynth/render.hpp"
#include "posesynth/skeleton_config.hpp"

using namespace posesynth;

namespace {

Keypoints2D hidden() {
  Keypoints2D k;
  for (auto& p : k) p = {0.0, 0.0, 0};
  return k;
}

bool black(const RasterImage& img, int x, int y) {
  const auto* p = img.at(x, y);
  return p[0] == 0 && p[1] == 0 && p[2] == 0;
}

Skeleton3D random_skeleton(Rng& rng) {
  const auto& cfg = default_skeleton_config();
  const auto& t = cfg.templates[rng.below(10)];
  return forward_kinematics(build_tree(cfg.profile, CameraModel{}), perturb_template(t, cfg.limits, rng.next_u64()));
}

Keypoints2D random_keypoints(Rng& rng) {
  Keypoints2D k;
  for (auto& p : k) p = {rng.uniform(-100.0, 612.0), rng.uniform(-100.0, 612.0), int(rng.below(3))};
  return k;
}

}  // namespace

TEST_CASE("openpose limb constants") {
  const LimbSpec s = openpose_limb_spec(512, 512);
  CHECK(s.limbs.size() == 17);
  CHECK(s.limb_thickness_px == 4.0);
  CHECK(s.joint_radius_px == 4.0);
  CHECK(openpose_limb_spec(256, 384).joint_radius_px == 2.0);
  for (const auto& l : s.limbs) {
    CHECK(l.a >= 0);
    CHECK(l.b < int(kOpenPosePoints));
  }
  // Every COCO keypoint appears exactly once in the OpenPose order.
  std::array<int, kNumKeypoints> seen{};
  for (int c : kOpenPoseFromCoco)
    if (c >= 0) ++seen[std::size_t(c)];
  for (int n : seen) CHECK(n == 1);
}

TEST_CASE("render_openpose: nothing visible gives a black image") {
  const RasterImage img = render_openpose(hidden(), 128, 96, openpose_limb_spec(128, 96));
  CHECK(img.valid());
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](std::uint8_t v) { return v == 0; }));
}

TEST_CASE("render_openpose: single horizontal limb matches the geometric oracle") {
  Keypoints2D k = hidden();
  k[0] = {100, 100, 2};  // nose, OpenPose point 0
  k[1] = {200, 100, 2};  // left eye, OpenPose point 15
  LimbSpec spec;
  const Rgb red{200, 10, 10};
  spec.limbs = {{0, 15, red}};
  spec.joint_colors.fill({0, 0, 250});
  spec.limb_thickness_px = 4.0;
  spec.joint_radius_px = 3.0;
  const RasterImage img = render_openpose(k, 300, 200, spec);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const bool in_band = x >= 100 && x <= 200 && std::abs(y - 100) <= 2;
      const bool in_circle = (x - 100) * (x - 100) + (y - 100) * (y - 100) <= 9 ||
                             (x - 200) * (x - 200) + (y - 100) * (y - 100) <= 9;
      CHECK_MESSAGE(black(img, x, y) == !(in_band || in_circle), "pixel " << x << "," << y);
      if (in_band && !in_circle) CHECK(img.at(x, y)[0] == 200);
    }
}

TEST_CASE("render_openpose: limb skipped when an endpoint is not visible") {
  Keypoints2D k = hidden();
  k[0] = {100, 100, 2};
  k[1] = {200, 100, 0};
  LimbSpec spec = openpose_limb_spec(300, 200);
  spec.limbs = {{0, 15, {255, 255, 255}}};
  const RasterImage img = render_openpose(k, 300, 200, spec);
  CHECK(black(img, 150, 100));
  CHECK_FALSE(black(img, 100, 100));
}

TEST_CASE("render_openpose: neck is the shoulder midpoint") {
  Keypoints2D k = hidden();
  k[5] = {300, 200, 2};
  k[6] = {200, 200, 2};
  const LimbSpec spec = openpose_limb_spec(512, 512);
  const RasterImage img = render_openpose(k, 512, 512, spec);
  const auto* p = img.at(250, 200);
  CHECK(Rgb{p[0], p[1], p[2]} == spec.joint_colors[kOpenPoseNeck]);
  k[6].v = 0;
  const RasterImage no_neck = render_openpose(k, 512, 512, spec);
  CHECK(black(no_neck, 250, 200));
}

TEST_CASE("render_openpose: off-canvas keypoints are clipped") {
  Keypoints2D k = hidden();
  k[0] = {-5000, 50, 2};
  k[1] = {9000, 50, 2};
  LimbSpec spec = openpose_limb_spec(128, 128);
  spec.limbs = {{0, 15, {9, 9, 9}}};
  const RasterImage img = render_openpose(k, 128, 128, spec);
  for (int x = 0; x < 128; ++x) CHECK_FALSE(black(img, x, 50));
  CHECK(black(img, 64, 60));
}

TEST_CASE("render_openpose: output depends only on its inputs") {
  Rng rng(12);
  std::vector<Keypoints2D> inputs;
  std::vector<std::uint64_t> hashes;
  const LimbSpec spec = openpose_limb_spec(256, 256);
  for (int i = 0; i < 20; ++i) {
    inputs.push_back(random_keypoints(rng));
    hashes.push_back(content_hash(render_openpose(inputs.back(), 256, 256, spec)));
  }
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int round = 0; round < 3; ++round) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i : order) CHECK(content_hash(render_openpose(inputs[i], 256, 256, spec)) == hashes[i]);
  }
}

TEST_CASE("render_depth: empty scene is background") {
  const DepthMap d = render_depth(std::vector<Capsule>{}, CameraModel{}, 64, 64);
  CHECK(std::all_of(d.values.begin(), d.values.end(), [](auto v) { return v == DepthMap::kBackground; }));
}

TEST_CASE("render_depth: nearer bone wins where bones overlap") {
  CameraModel cam;
  const Capsule near_bone{{-0.1, 0.0, 0.4}, {0.1, 0.0, 0.4}, 0.02};
  const Capsule far_bone{{0.0, -0.1, 0.6}, {0.0, 0.1, 0.6}, 0.02};
  const DepthMap both = render_depth({near_bone, far_bone}, cam, 512, 512);
  const DepthMap near_only = render_depth({near_bone}, cam, 512, 512);
  const DepthMap far_only = render_depth({far_bone}, cam, 512, 512);
  int overlap = 0;
  for (std::size_t i = 0; i < both.values.size(); ++i) {
    const bool n = near_only.values[i] != DepthMap::kBackground;
    const bool f = far_only.values[i] != DepthMap::kBackground;
    if (n) CHECK(both.values[i] == near_only.values[i]);
    if (!n && f) CHECK(both.values[i] == far_only.values[i]);
    overlap += n && f;
  }
  CHECK(overlap > 0);
  // Surface of the near bone on the optical axis sits at 0.4 - r.
  const double z = 0.38;
  const auto expect = std::uint16_t(std::nearbyint((z - 0.2) / 1.8 * 65535.0));
  CHECK(std::abs(int(both.at(256, 256)) - int(expect)) <= 1);
}

TEST_CASE("render_depth: vertical bone on the optical axis is mirror symmetric") {
  CameraModel cam;
  const Capsule bone{{0.0, -0.15, 0.5}, {0.0, 0.15, 0.5}, 0.04};
  const DepthMap d = render_depth({bone}, cam, 512, 512);
  int covered = 0;
  for (int y = 0; y < 512; ++y)
    for (int k = 1; k < 256; ++k) {
      const int a = d.at(256 - k, y), b = d.at(256 + k, y);
      CHECK(std::abs(a - b) <= 1);
      covered += a != DepthMap::kBackground;
    }
  CHECK(covered > 100);
}

// Under perspective a bone translated along Z also slides across the image,
// so a slanted bone can present a nearer part of itself to a given pixel. The
// bone is therefore pushed back along the viewing rays (scaled about the
// camera center), which keeps its silhouette and raises its depth everywhere.
TEST_CASE("render_depth: pushing a bone away never decreases any depth value") {
  Rng rng(21);
  const CameraModel cam;
  int changed = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<Capsule> caps = body_capsules(random_skeleton(rng));
    const DepthMap before = render_depth(caps, cam, 256, 256);
    Capsule& bone = caps[rng.below(caps.size())];
    const double k = rng.uniform(1.001, 1.5);
    bone = {bone.a * k, bone.b * k, bone.radius * k};
    const DepthMap after = render_depth(caps, cam, 256, 256);
    for (std::size_t i = 0; i < before.values.size(); ++i) REQUIRE(after.values[i] >= before.values[i]);
    changed += after != before;
  }
  CHECK(changed > 50);
}

TEST_CASE("renderers are deterministic") {
  Rng rng(5);
  const CameraModel cam;
  const LimbSpec spec = openpose_limb_spec(512, 512);
  for (int t = 0; t < 5; ++t) {
    const Skeleton3D s = random_skeleton(rng);
    const Keypoints2D k = project(s, cam);
    CHECK(content_hash(render_openpose(k, 512, 512, spec)) == content_hash(render_openpose(k, 512, 512, spec)));
    CHECK(content_hash(render_depth(s, cam, 512, 512)) == content_hash(render_depth(s, cam, 512, 512)));
  }
}

TEST_CASE("png round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "posesynth_png_test";
  Rng rng(9);
  RasterImage img(37, 23);
  for (auto& p : img.pixels) p = std::uint8_t(rng.below(256));
  write_png(img, dir / "a.png");
  CHECK(read_png_rgb(dir / "a.png") == img);
  DepthMap d(19, 11, 0.2, 2.0);
  for (auto& v : d.values) v = std::uint16_t(rng.below(65536));
  write_png(d, dir / "d.png");
  CHECK(read_png_depth(dir / "d.png", 0.2, 2.0) == d);
  CHECK_THROWS(read_png_depth(dir / "a.png", 0.2, 2.0));
  std::filesystem::remove_all(dir);
}
