#pragma once

#include <array>
#include <optional>

#include "posesynth/io.hpp"
#include "posesynth/keypoints.hpp"
#include "posesynth/skeleton.hpp"

namespace posesynth {

struct SkeletonConfig;

inline constexpr int kUndeterminable = -1;

// Scale-free posture measurements used by the decision rules.
struct PostureCues {
  double torso = 0.0;  // |shoulder mid - hip mid| / shoulder length; drops when leaning at the desk
  double flex = 0.0;   // (y_nose + y_eye_mid - 2 y_ear_mid) / shoulder length; grows as the head bows
  double yaw = 0.0;    // (x_nose - x_ear_mid) / ear distance; signed head turn
  double spine = 0.0;  // alpha_spine, degrees
  double rot = 0.0;    // shoulder-line tilt minus alpha_spine, degrees; trunk rotation seen from below
};

// Nullopt unless nose, eyes, ears, shoulders and hips are all visible.
std::optional<PostureCues> posture_cues(const Keypoints2D& kps);

struct CategoryRules {
  double desk_torso = 0.0;  // lean_desk below this
  double head_yaw = 0.0;    // head-turn above this; flexion rules need |yaw| below it
  double very_flex = 0.0;
  double bowed_flex = 0.0;
  double lateral_deg = 0.0;
  double rotation_deg = 0.0;
};

// Each threshold is the midpoint between the cue value of the category it
// detects and the nearest value among the canonical templates it must not
// fire on, measured on the unperturbed templates projected by `camera`.
CategoryRules calibrate_category_rules(const SkeletonConfig& cfg, const CameraModel& camera);
const CategoryRules& default_category_rules();

// Most severe first: lean_desk, very_bowed, bowed_head (both only with a
// roughly frontal head), lateral lean, trunk rotation, head turn, correct.
// Returns kUndeterminable when posture_cues() cannot be computed.
int infer_category(const Keypoints2D& kps, const CategoryRules& rules = default_category_rules());

ojson rules_to_json(const CategoryRules& rules);

}  // namespace posesynth
