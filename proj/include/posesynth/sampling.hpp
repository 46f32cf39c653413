#pragma once

#include <cstdint>

#include "posesynth/coco.hpp"
#include "posesynth/random.hpp"
#include "posesynth/skeleton.hpp"
#include "posesynth/skeleton_config.hpp"

namespace posesynth {

// Image ids encode class and index so adding classes or samples never
// renumbers existing ones.
constexpr long image_id_for(int category, long index) { return 1 + long(category) * 100000L + index; }

constexpr std::uint64_t sample_seed(std::uint64_t global_seed, int category, long index) {
  return derive_seed(global_seed, {std::uint64_t(category), std::uint64_t(index)});
}

struct PoseSample {
  long image_id = 0;
  int category = 0;
  std::uint64_t seed = 0;
  PoseAngles angles;
  Skeleton3D skeleton;
  Keypoints2D keypoints{};  // projected, off-image points marked v = 0, unrounded
};

// perturb -> forward kinematics -> projection -> frame visibility.
PoseSample sample_pose(const SkeletonConfig& cfg, const KinematicTree& tree, const CameraModel& camera, int category,
                       long index, std::uint64_t global_seed);

}  // namespace posesynth
