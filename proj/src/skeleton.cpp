#include "posesynth/skeleton.hpp"

#include <algorithm>
#include <sstream>

#include "posesynth/errors.hpp"
#include "posesynth/random.hpp"

namespace posesynth {

std::optional<Joint> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumJoints; ++i)
    if (kJointNames[i] == name) return static_cast<Joint>(i);
  return std::nullopt;
}

void JointLimits::validate() const {
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) {
      const auto& r = ranges[j][a];
      if (r && r->min_deg > r->max_deg) {
        std::ostringstream os;
        os << "joint limit min > max for " << kJointNames[j] << "." << kAxisNames[a];
        throw ConfigError(os.str());
      }
    }
}

void PoseTemplate::validate(const JointLimits& limits) const {
  if (category_id < 0 || category_id >= kNumCategories)
    throw ConfigError("template '" + name + "' has category id out of range");
  if (name != kCategoryNames[category_id])
    throw ConfigError("template " + std::to_string(category_id) + " must be named '" +
                      std::string(kCategoryNames[category_id]) + "', got '" + name + "'");
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) {
      const double eps = perturbation[j][a];
      if (eps < 0.0 || eps > kMaxPerturbationDeg)
        throw ConfigError("template '" + name + "': perturbation for " +
                          std::string(kJointNames[j]) + " outside [0, 12] degrees");
      const auto& r = limits.ranges[j][a];
      const double v = base.deg[j][a];
      if (r && (v < r->min_deg || v > r->max_deg))
        throw ConfigError("template '" + name + "': base angle " + std::string(kJointNames[j]) +
                          "." + kAxisNames[a] + " violates its joint limit");
    }
}

void AnthropometricProfile::validate() const {
  for (double v : {head, neck, torso, upper_arm, forearm, hip_width, shoulder_width, thigh, shin,
                   adult_head_torso_ratio})
    if (!(v > 0.0)) throw ConfigError("anthropometric profile lengths must be positive");
  if (!(head_torso_ratio() > adult_head_torso_ratio))
    throw ConfigError("child head/torso ratio must exceed the adult reference ratio");
}

void CameraModel::validate() const {
  if (!(focal_px > 0.0)) throw ConfigError("camera focal length must be positive");
  if (!(distance_m > 0.0)) throw ConfigError("camera distance must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
  if (!in_frame(cx, cy, width, height))
    throw ConfigError("camera principal point must lie inside the image");
}

int KinematicTree::root() const {
  for (std::size_t i = 0; i < joints.size(); ++i)
    if (joints[i].parent < 0) return static_cast<int>(i);
  return -1;
}

void KinematicTree::validate() const {
  if (joints.size() != kNumJoints) throw ConfigError("kinematic tree must list every joint");
  int roots = 0;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    if (idx(j.id) != i) throw ConfigError("kinematic tree joints must be indexed by id");
    if (j.parent < 0) {
      ++roots;
    } else if (static_cast<std::size_t>(j.parent) >= i) {
      // Parents strictly before children rules out cycles.
      throw ConfigError("kinematic tree joint '" + std::string(kJointNames[i]) +
                        "' does not follow its parent");
    }
  }
  if (roots != 1) throw ConfigError("kinematic tree must have exactly one root");
}

KinematicTree build_tree(const AnthropometricProfile& p, const CameraModel& camera,
                         const FaceLayout& face) {
  p.validate();
  const double sh = p.shoulder_width / 2.0;
  const double hw = p.hip_width / 2.0;
  const double H = p.head;
  const auto mirror_x = [](Vec3 v) { return Vec3{-v.x, v.y, v.z}; };

  KinematicTree tree;
  tree.joints.resize(kNumJoints);
  auto add = [&](Joint j, std::optional<Joint> parent, Vec3 offset, bool mirrored = false) {
    tree.joints[idx(j)] = {j, parent ? static_cast<int>(idx(*parent)) : -1, offset, mirrored};
  };
  add(Joint::kPelvis, std::nullopt, {});
  add(Joint::kSpine, Joint::kPelvis, {});
  add(Joint::kChest, Joint::kSpine, {0, p.torso, 0});
  add(Joint::kNeck, Joint::kChest, {});
  add(Joint::kHead, Joint::kNeck, {0, p.neck, 0});
  add(Joint::kNose, Joint::kHead, face.nose * H);
  add(Joint::kLeftEye, Joint::kHead, mirror_x(face.eye) * H, true);
  add(Joint::kRightEye, Joint::kHead, face.eye * H);
  add(Joint::kLeftEar, Joint::kHead, mirror_x(face.ear) * H, true);
  add(Joint::kRightEar, Joint::kHead, face.ear * H);
  add(Joint::kLeftShoulder, Joint::kChest, {-sh, 0, 0}, true);
  add(Joint::kLeftElbow, Joint::kLeftShoulder, {0, -p.upper_arm, 0}, true);
  add(Joint::kLeftWrist, Joint::kLeftElbow, {0, -p.forearm, 0}, true);
  add(Joint::kRightShoulder, Joint::kChest, {sh, 0, 0});
  add(Joint::kRightElbow, Joint::kRightShoulder, {0, -p.upper_arm, 0});
  add(Joint::kRightWrist, Joint::kRightElbow, {0, -p.forearm, 0});
  add(Joint::kLeftHip, Joint::kPelvis, {-hw, 0, 0}, true);
  add(Joint::kLeftKnee, Joint::kLeftHip, {0, -p.thigh, 0}, true);
  add(Joint::kLeftAnkle, Joint::kLeftKnee, {0, -p.shin, 0}, true);
  add(Joint::kRightHip, Joint::kPelvis, {hw, 0, 0});
  add(Joint::kRightKnee, Joint::kRightHip, {0, -p.thigh, 0});
  add(Joint::kRightAnkle, Joint::kRightKnee, {0, -p.shin, 0});

  // The camera sits mount_height above the pelvis; body +Y is image up.
  tree.root_position = {0.0, camera.mount_height_m, camera.distance_m};
  tree.validate();
  return tree;
}

PoseAngles clamp_pose(const PoseAngles& angles, const JointLimits& limits) {
  PoseAngles out = angles;
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) {
      const auto& r = limits.ranges[j][a];
      if (!r) {
        std::ostringstream os;
        os << "no joint limit for " << kJointNames[j] << "." << kAxisNames[a];
        throw ConfigError(os.str());
      }
      out.deg[j][a] = std::clamp(angles.deg[j][a], r->min_deg, r->max_deg);
    }
  return out;
}

PoseAngles perturb_template(const PoseTemplate& tmpl, const JointLimits& limits,
                            std::uint64_t seed) {
  Rng rng(seed);
  PoseAngles out = tmpl.base;
  // One draw per joint/axis regardless of epsilon keeps the stream layout fixed.
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) {
      const double eps = tmpl.perturbation[j][a];
      out.deg[j][a] += eps * (2.0 * rng.uniform() - 1.0);
    }
  return clamp_pose(out, limits);
}

Skeleton3D forward_kinematics(const KinematicTree& tree, const PoseAngles& angles) {
  std::array<Mat3, kNumJoints> frame;
  std::array<Vec3, kNumJoints> body;
  for (std::size_t i = 0; i < tree.joints.size(); ++i) {
    const auto& tj = tree.joints[i];
    AxisTriple a = angles.deg[i];
    if (tj.mirrored) {
      a[1] = -a[1];
      a[2] = -a[2];
    }
    const Mat3 local =
        Mat3::rot_y(deg2rad(a[1])) * Mat3::rot_x(deg2rad(a[0])) * Mat3::rot_z(deg2rad(a[2]));
    if (tj.parent < 0) {
      body[i] = tj.offset;
      frame[i] = local;
    } else {
      const auto p = static_cast<std::size_t>(tj.parent);
      body[i] = body[p] + frame[p] * tj.offset;
      frame[i] = frame[p] * local;
    }
  }
  Skeleton3D out;
  const Vec3 camera_in_body{0.0, tree.root_position.y, 0.0};
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    Vec3 c = tree.body_to_camera * (body[i] - camera_in_body);
    c.z += tree.root_position.z;
    c.x += tree.root_position.x;
    out.joints[i] = c;
  }
  return out;
}

Keypoints2D project(const Skeleton3D& skeleton, const CameraModel& camera) {
  Keypoints2D out;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const Joint j = kCocoJoints[k];
    const Vec3& p = skeleton[j];
    if (!(p.z > 0.0))
      throw ProjectionError("joint '" + std::string(kJointNames[idx(j)]) +
                            "' is not in front of the camera");
    out[k] = {camera.cx + camera.focal_px * p.x / p.z, camera.cy + camera.focal_px * p.y / p.z, 2};
  }
  return out;
}

Keypoints2D apply_frame_visibility(Keypoints2D kps, int width, int height) {
  for (auto& k : kps)
    if (!in_frame(k.x, k.y, width, height)) k.v = 0;
  return kps;
}

}  // namespace posesynth
