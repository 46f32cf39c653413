#pragma once

#include <array>
#include <string>
#include <vector>

#include "posesynth/io.hpp"
#include "posesynth/keypoints.hpp"

namespace posesynth {

inline constexpr std::size_t kUpperBodyPoints = 13;
inline constexpr std::size_t kNumFeatures = 18;

// Nose, eyes, ears, shoulders, elbows, wrists, hips: COCO 0-12 in COCO order.
inline constexpr std::array<Kp, kUpperBodyPoints> kUpperBody = {
    Kp::kNose,          Kp::kLeftEye,   Kp::kRightEye,   Kp::kLeftEar,   Kp::kRightEar,
    Kp::kLeftShoulder,  Kp::kRightShoulder, Kp::kLeftElbow, Kp::kRightElbow, Kp::kLeftWrist,
    Kp::kRightWrist,    Kp::kLeftHip,   Kp::kRightHip};

std::array<Keypoint, kUpperBodyPoints> select_upper_body(const Keypoints2D& kps);

// Image coordinates, y down. Angles in degrees, positive clockwise on screen.
struct GeometricQuantities {
  // Shoulder-midpoint minus hip-midpoint against image up; positive when the
  // shoulders sit to the image right of the hips.
  double alpha_spine = 0.0;
  // Nose minus shoulder-midpoint against the upward normal of the shoulder
  // line (left minus right shoulder rotated a quarter turn). Measuring against
  // image up or against the spine axis would be the obvious alternatives.
  double alpha_head = 0.0;
  double r_shoulder = 0.0;  // (y_left - y_right) / shoulder length
  double h_eye = 0.0;       // (y_shoulder_mid - y_eye_mid) / shoulder length
  double d_lateral = 0.0;   // (x_shoulder_mid - x_hip_mid) / shoulder length
};

// Needs both shoulders, both hips, the nose and at least one eye (v > 0).
// Throws FeatureError naming the first missing keypoint or on zero shoulder width.
GeometricQuantities geometric_quantities(const Keypoints2D& kps);

// 13 vertical coordinates (pixels) then the five quantities above. Selected
// joints that are not visible contribute NaN.
using FeatureVector = std::array<double, kNumFeatures>;

FeatureVector raw_features(const Keypoints2D& kps);

struct NormalizationStats {
  FeatureVector mean{};
  FeatureVector stddev{};
  std::string fitted_on = "train";
};

// Population mean/std per feature over finite entries. Throws FeatureError on
// fewer than two samples or a constant feature.
NormalizationStats fit_normalizer(const std::vector<FeatureVector>& raw, std::string fitted_on = "train");

// z-scores; missing (NaN) entries become 0, the training mean.
FeatureVector normalize(const FeatureVector& raw, const NormalizationStats& stats);

FeatureVector extract(const Keypoints2D& kps, const NormalizationStats& stats);

ojson stats_to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const nlohmann::json& doc);

}  // namespace posesynth
