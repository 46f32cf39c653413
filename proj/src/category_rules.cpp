#include "posesynth/category_rules.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "posesynth/errors.hpp"
#include "posesynth/geometry.hpp"
#include "posesynth/skeleton_config.hpp"

namespace posesynth {

std::optional<PostureCues> posture_cues(const Keypoints2D& kps) {
  for (Kp k : {Kp::kNose, Kp::kLeftEye, Kp::kRightEye, Kp::kLeftEar, Kp::kRightEar, Kp::kLeftShoulder,
               Kp::kRightShoulder, Kp::kLeftHip, Kp::kRightHip})
    if (!kps[idx(k)].visible()) return std::nullopt;
  auto at = [&](Kp k) { return kps[idx(k)]; };
  const Keypoint ls = at(Kp::kLeftShoulder), rs = at(Kp::kRightShoulder);
  const Keypoint le = at(Kp::kLeftEar), re = at(Kp::kRightEar);
  const double shoulder_len = std::hypot(ls.x - rs.x, ls.y - rs.y);
  const double ear_len = std::hypot(le.x - re.x, le.y - re.y);
  if (!(shoulder_len > 0.0) || !(ear_len > 0.0)) return std::nullopt;

  const double smx = 0.5 * (ls.x + rs.x), smy = 0.5 * (ls.y + rs.y);
  const double hmx = 0.5 * (at(Kp::kLeftHip).x + at(Kp::kRightHip).x);
  const double hmy = 0.5 * (at(Kp::kLeftHip).y + at(Kp::kRightHip).y);
  const double eye_y = 0.5 * (at(Kp::kLeftEye).y + at(Kp::kRightEye).y);
  const double ear_x = 0.5 * (le.x + re.x), ear_y = 0.5 * (le.y + re.y);
  const Keypoint nose = at(Kp::kNose);

  PostureCues c;
  c.torso = std::hypot(smx - hmx, smy - hmy) / shoulder_len;
  c.flex = (nose.y + eye_y - 2.0 * ear_y) / shoulder_len;
  c.yaw = (nose.x - ear_x) / ear_len;
  c.spine = rad2deg(std::atan2(smx - hmx, -(smy - hmy)));
  c.rot = rad2deg(std::atan2(ls.y - rs.y, ls.x - rs.x)) - c.spine;
  return c;
}

CategoryRules calibrate_category_rules(const SkeletonConfig& cfg, const CameraModel& camera) {
  const KinematicTree tree = build_tree(cfg.profile, camera);
  std::array<PostureCues, kNumCategories> q{};
  for (const auto& t : cfg.templates) {
    const auto cues = posture_cues(project(forward_kinematics(tree, t.base), camera));
    if (!cues) throw ConfigError("template '" + t.name + "' does not show the face, shoulders and hips");
    q[std::size_t(t.category_id)] = *cues;
  }
  auto max_of = [&](std::initializer_list<int> ids, auto cue) {
    double m = -1e300;
    for (int c : ids) m = std::max(m, cue(q[std::size_t(c)]));
    return m;
  };
  auto min_of = [&](std::initializer_list<int> ids, auto cue) {
    double m = 1e300;
    for (int c : ids) m = std::min(m, cue(q[std::size_t(c)]));
    return m;
  };
  auto mid = [](double a, double b) { return 0.5 * (a + b); };
  CategoryRules r;
  r.desk_torso = mid(q[3].torso, min_of({0, 1, 2, 4, 5, 6, 7, 8, 9}, [](const PostureCues& c) { return c.torso; }));
  r.head_yaw = mid(std::abs(q[6].yaw), max_of({0, 1, 2}, [](const PostureCues& c) { return std::abs(c.yaw); }));
  r.very_flex = mid(q[2].flex, max_of({0, 1, 4, 5}, [](const PostureCues& c) { return c.flex; }));
  r.bowed_flex = mid(q[1].flex, max_of({0, 4, 5}, [](const PostureCues& c) { return c.flex; }));
  r.lateral_deg = mid(std::abs(q[4].spine), max_of({0, 6, 7, 8, 9}, [](const PostureCues& c) { return std::abs(c.spine); }));
  r.rotation_deg = mid(std::abs(q[8].rot), max_of({0, 6, 7}, [](const PostureCues& c) { return std::abs(c.rot); }));
  return r;
}

const CategoryRules& default_category_rules() {
  static const CategoryRules rules = calibrate_category_rules(default_skeleton_config(), CameraModel{});
  return rules;
}

int infer_category(const Keypoints2D& kps, const CategoryRules& r) {
  const auto c = posture_cues(kps);
  if (!c) return kUndeterminable;
  if (c->torso < r.desk_torso) return 3;
  // A turned head moves the nose sideways and down in the image, which would
  // read as flexion; only judge flexion when the face is roughly frontal.
  if (std::abs(c->yaw) < r.head_yaw) {
    if (c->flex > r.very_flex) return 2;
    if (c->flex > r.bowed_flex) return 1;
  }
  if (std::abs(c->spine) > r.lateral_deg) return c->spine > 0.0 ? 4 : 5;
  if (std::abs(c->rot) > r.rotation_deg) return c->rot > 0.0 ? 8 : 9;
  if (std::abs(c->yaw) > r.head_yaw) return c->yaw > 0.0 ? 6 : 7;
  return 0;
}

ojson rules_to_json(const CategoryRules& r) {
  ojson j;
  j["desk_torso"] = r.desk_torso;
  j["head_yaw"] = r.head_yaw;
  j["very_flex"] = r.very_flex;
  j["bowed_flex"] = r.bowed_flex;
  j["lateral_deg"] = r.lateral_deg;
  j["rotation_deg"] = r.rotation_deg;
  return j;
}

}  // namespace posesynth
