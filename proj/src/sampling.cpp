#include "posesynth/sampling.hpp"

#include "posesynth/errors.hpp"

namespace posesynth {

PoseSample sample_pose(const SkeletonConfig& cfg, const KinematicTree& tree, const CameraModel& camera, int category,
                       long index, std::uint64_t global_seed) {
  if (category < 0 || std::size_t(category) >= cfg.templates.size())
    throw ConfigError("no template for category " + std::to_string(category));
  PoseSample s;
  s.category = category;
  s.image_id = image_id_for(category, index);
  s.seed = sample_seed(global_seed, category, index);
  s.angles = perturb_template(cfg.templates[std::size_t(category)], cfg.limits, s.seed);
  s.skeleton = forward_kinematics(tree, s.angles);
  s.keypoints = apply_frame_visibility(project(s.skeleton, camera), camera.width, camera.height);
  return s;
}

}  // namespace posesynth
