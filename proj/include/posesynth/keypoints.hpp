#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace posesynth {

inline constexpr std::size_t kNumKeypoints = 17;
inline constexpr int kNumCategories = 10;

// COCO-17 keypoint order.
enum class Kp : std::uint8_t {
  kNose = 0,
  kLeftEye,
  kRightEye,
  kLeftEar,
  kRightEar,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

constexpr std::size_t idx(Kp k) { return static_cast<std::size_t>(k); }

inline constexpr std::array<std::string_view, kNumKeypoints> kKeypointNames = {
    "nose",          "left_eye",      "right_eye",  "left_ear",    "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist",   "left_hip",      "right_hip",  "left_knee",   "right_knee",
    "left_ankle",    "right_ankle"};

// Posture categories, ids fixed.
inline constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "correct_posture", "bowed_head",   "very_bowed",  "lean_desk", "lean_left",
    "lean_right",      "left_headed",  "right_headed", "turn_left", "turn_right"};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  int v = 0;  // 0 not labeled, 1 labeled occluded, 2 labeled visible

  bool visible() const { return v > 0; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using Keypoints2D = std::array<Keypoint, kNumKeypoints>;

inline int count_visible(const Keypoints2D& kps) {
  int n = 0;
  for (const auto& k : kps) n += k.visible() ? 1 : 0;
  return n;
}

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

// Pixel (i, j) has its center at (i, j); the frame covers [-0.5, w - 0.5).
inline bool in_frame(double x, double y, int width, int height) {
  return x >= -0.5 && x < width - 0.5 && y >= -0.5 && y < height - 0.5;
}

}  // namespace posesynth
