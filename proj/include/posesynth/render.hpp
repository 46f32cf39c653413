#pragma once

#include <array>
#include <vector>

#include "posesynth/keypoints.hpp"
#include "posesynth/raster.hpp"
#include "posesynth/skeleton.hpp"

namespace posesynth {

// OpenPose 18-point body order. Index 1 (neck) has no COCO counterpart and
// is synthesized as the shoulder midpoint.
inline constexpr std::size_t kOpenPosePoints = 18;
inline constexpr std::size_t kOpenPoseNeck = 1;

// kOpenPoseFromCoco[i] is the COCO index of OpenPose point i, or -1 for the neck.
inline constexpr std::array<int, kOpenPosePoints> kOpenPoseFromCoco = {
    0, -1, 6, 8, 10, 5, 7, 9, 12, 14, 16, 11, 13, 15, 2, 1, 4, 3};

struct Limb {
  int a = 0;  // OpenPose point indices
  int b = 0;
  Rgb color{};
};

struct LimbSpec {
  std::vector<Limb> limbs;
  std::array<Rgb, kOpenPosePoints> joint_colors{};
  double limb_thickness_px = 4.0;  // full width of the limb band
  double joint_radius_px = 4.0;
};

// The OpenPose body palette and the first 17 limb pairs of its connection
// table (the original's two ear-to-shoulder links are dropped). Thickness and
// radius are 4 px at 512x512 and scale with the shorter canvas side.
LimbSpec openpose_limb_spec(int width, int height);

// Limbs first, then joint circles, on black. No anti-aliasing: all coverage
// tests run on integer 1/16-pixel coordinates so output bytes are identical
// on every platform.
RasterImage render_openpose(const Keypoints2D& kps, int width, int height, const LimbSpec& spec);

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

// Girth radii in meters for the capsule proxy of each body part.
struct GirthTable {
  double torso = 0.10;
  double head = 0.09;
  double neck = 0.04;
  double upper_arm = 0.035;
  double forearm = 0.03;
  double thigh = 0.06;
  double shin = 0.045;
  double shoulder_girdle = 0.05;
  double pelvis = 0.07;
};

std::vector<Capsule> body_capsules(const Skeleton3D& skeleton, const GirthTable& girth = {});

struct DepthRange {
  double near_m = 0.2;
  double far_m = 2.0;
};

// Ray-casts every capsule; each pixel keeps the nearest surface depth (camera
// Z) and maps [near, far] linearly onto [0, 65535]. Uncovered pixels stay at
// the background value 65535.
DepthMap render_depth(const std::vector<Capsule>& capsules, const CameraModel& camera, int width, int height,
                      DepthRange range = {});
DepthMap render_depth(const Skeleton3D& skeleton, const CameraModel& camera, int width, int height,
                      DepthRange range = {}, const GirthTable& girth = {});

}  // namespace posesynth
