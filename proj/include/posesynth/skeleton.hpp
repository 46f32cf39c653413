#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "posesynth/geometry.hpp"
#include "posesynth/keypoints.hpp"

namespace posesynth {

// Joints of the child kinematic tree. Parents always precede children.
//
// Body frame: +X toward the subject's right, +Y up, +Z toward the subject's
// back. With this frame a negative x-rotation is forward flexion (neck, trunk),
// a positive z-rotation leans toward the subject's left and a positive
// y-rotation turns toward the subject's left. Left-side limbs mirror the y and
// z angles so both sides share limits: positive shoulder z is abduction on
// either side.
enum class Joint : std::uint8_t {
  kPelvis = 0,
  kSpine,
  kChest,
  kNeck,
  kHead,
  kNose,
  kLeftEye,
  kRightEye,
  kLeftEar,
  kRightEar,
  kLeftShoulder,
  kLeftElbow,
  kLeftWrist,
  kRightShoulder,
  kRightElbow,
  kRightWrist,
  kLeftHip,
  kLeftKnee,
  kLeftAnkle,
  kRightHip,
  kRightKnee,
  kRightAnkle,
};

inline constexpr std::size_t kNumJoints = 22;

constexpr std::size_t idx(Joint j) { return static_cast<std::size_t>(j); }

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "pelvis",         "spine",       "chest",       "neck",       "head",
    "nose",           "left_eye",    "right_eye",   "left_ear",   "right_ear",
    "left_shoulder",  "left_elbow",  "left_wrist",  "right_shoulder", "right_elbow",
    "right_wrist",    "left_hip",    "left_knee",   "left_ankle", "right_hip",
    "right_knee",     "right_ankle"};

std::optional<Joint> joint_from_name(std::string_view name);

// COCO keypoint k is realized by joint kCocoJoints[k].
inline constexpr std::array<Joint, kNumKeypoints> kCocoJoints = {
    Joint::kNose,          Joint::kLeftEye,       Joint::kRightEye,   Joint::kLeftEar,
    Joint::kRightEar,      Joint::kLeftShoulder,  Joint::kRightShoulder, Joint::kLeftElbow,
    Joint::kRightElbow,    Joint::kLeftWrist,     Joint::kRightWrist, Joint::kLeftHip,
    Joint::kRightHip,      Joint::kLeftKnee,      Joint::kRightKnee,  Joint::kLeftAnkle,
    Joint::kRightAnkle};

// Euler angles in degrees, applied Z then X then Y about the parent axes.
using AxisTriple = std::array<double, 3>;
inline constexpr std::array<char, 3> kAxisNames = {'x', 'y', 'z'};

struct AngleRange {
  double min_deg = 0.0;
  double max_deg = 0.0;
  friend bool operator==(const AngleRange&, const AngleRange&) = default;
};

struct JointLimits {
  std::array<std::array<std::optional<AngleRange>, 3>, kNumJoints> ranges{};

  void set(Joint j, int axis, AngleRange r) { ranges[idx(j)][axis] = r; }
  const std::optional<AngleRange>& get(Joint j, int axis) const { return ranges[idx(j)][axis]; }

  // Throws ConfigError on min > max.
  void validate() const;
};

struct PoseAngles {
  std::array<AxisTriple, kNumJoints> deg{};

  AxisTriple& operator[](Joint j) { return deg[idx(j)]; }
  const AxisTriple& operator[](Joint j) const { return deg[idx(j)]; }
  friend bool operator==(const PoseAngles&, const PoseAngles&) = default;
};

inline constexpr double kMaxPerturbationDeg = 12.0;

struct PoseTemplate {
  int category_id = 0;
  std::string name;
  PoseAngles base;
  std::array<AxisTriple, kNumJoints> perturbation{};  // epsilon per joint/axis, degrees

  void validate(const JointLimits& limits) const;
};

// Segment lengths in meters. Stands in for a learned body shape space.
struct AnthropometricProfile {
  double head = 0.2025;
  double neck = 0.10;
  double torso = 0.36;
  double upper_arm = 0.23;
  double forearm = 0.19;
  double hip_width = 0.20;
  double shoulder_width = 0.28;
  double thigh = 0.33;
  double shin = 0.30;
  // Adult head-length / torso-length reference; the child ratio must exceed it.
  double adult_head_torso_ratio = 0.45;

  double head_torso_ratio() const { return head / torso; }
  void validate() const;
};

// Face keypoints as offsets in the head frame, in units of head length.
struct FaceLayout {
  Vec3 nose{0.0, -0.10, -0.50};
  Vec3 eye{0.16, 0.05, -0.42};  // right eye; the left eye mirrors x
  Vec3 ear{0.36, 0.0, 0.0};     // right ear; the left ear mirrors x
};

struct CameraModel {
  double focal_px = 280.0;
  double cx = 256.0;
  double cy = 256.0;
  double distance_m = 0.51;      // camera to pelvis, along the optical axis
  double mount_height_m = 0.22;  // camera height above the pelvis
  int width = 512;
  int height = 512;

  void validate() const;
};

struct TreeJoint {
  Joint id;
  int parent = -1;
  Vec3 offset;  // rest offset from the parent, in the parent frame (meters)
  bool mirrored = false;
};

struct KinematicTree {
  std::vector<TreeJoint> joints;  // indexed by Joint, parents first
  Vec3 root_position;             // pelvis in camera coordinates
  Mat3 body_to_camera = Mat3::diag(-1.0, -1.0, 1.0);

  int root() const;
  // Throws ConfigError unless the tree has one root and parents precede children.
  void validate() const;
};

KinematicTree build_tree(const AnthropometricProfile& profile, const CameraModel& camera,
                         const FaceLayout& face = {});

// Camera coordinates: +X image right, +Y image down, +Z along the optical axis.
struct Skeleton3D {
  std::array<Vec3, kNumJoints> joints{};

  const Vec3& operator[](Joint j) const { return joints[idx(j)]; }
  Vec3& operator[](Joint j) { return joints[idx(j)]; }
  friend bool operator==(const Skeleton3D&, const Skeleton3D&) = default;
};

PoseAngles clamp_pose(const PoseAngles& angles, const JointLimits& limits);

PoseAngles perturb_template(const PoseTemplate& tmpl, const JointLimits& limits,
                            std::uint64_t seed);

Skeleton3D forward_kinematics(const KinematicTree& tree, const PoseAngles& angles);

// Pinhole projection; every keypoint gets v = 2. Throws ProjectionError if a
// joint is at or behind the camera plane.
Keypoints2D project(const Skeleton3D& skeleton, const CameraModel& camera);

// Marks keypoints outside the image as v = 0.
Keypoints2D apply_frame_visibility(Keypoints2D kps, int width, int height);

}  // namespace posesynth
