#pragma once

#include "posesynth/coco.hpp"
#include "posesynth/features.hpp"
#include "posesynth/generation.hpp"
#include "posesynth/sampling.hpp"
#include "posesynth/skeleton_config.hpp"

namespace fixtures {

inline const posesynth::KinematicTree& tree() {
  static const posesynth::KinematicTree t =
      posesynth::build_tree(posesynth::default_skeleton_config().profile, posesynth::CameraModel{});
  return t;
}

inline posesynth::Keypoints2D canonical_keypoints(int category) {
  const auto& cfg = posesynth::default_skeleton_config();
  return posesynth::project(posesynth::forward_kinematics(tree(), cfg.templates[std::size_t(category)].base),
                            posesynth::CameraModel{});
}

inline posesynth::AnnotationRecord sample_annotation(int category, long index, std::uint64_t seed) {
  const auto s = posesynth::sample_pose(posesynth::default_skeleton_config(), tree(), posesynth::CameraModel{},
                                        category, index, seed);
  return posesynth::make_annotation(s.image_id, s.image_id, category, s.keypoints);
}

inline posesynth::DatasetManifest sample_manifest(int per_class, std::uint64_t seed) {
  posesynth::DatasetManifest m;
  for (int c = 0; c < posesynth::kNumCategories; ++c)
    for (long i = 0; i < per_class; ++i) {
      auto a = sample_annotation(c, i, seed);
      m.images.push_back({a.image_id, "synth/" + std::to_string(a.image_id) + ".png", 512, 512, {c, 0, ""}});
      m.annotations.push_back(a);
    }
  return m;
}

struct LabelledFeatures {
  std::vector<posesynth::FeatureVector> raw;
  std::vector<int> labels;
};

// Raw features of noisy re-estimates of sampled poses, `per_class` per category.
inline LabelledFeatures desk_features(int per_class, std::uint64_t seed, long first_index = 0) {
  LabelledFeatures out;
  posesynth::NoiseSpec noise;
  noise.drop_probability = 0.0;
  for (int c = 0; c < posesynth::kNumCategories; ++c)
    for (long i = first_index; i < first_index + per_class; ++i) {
      const auto a = sample_annotation(c, i, seed);
      const auto est = posesynth::mock_reestimate(a.keypoints, noise, posesynth::derive_seed(seed, {std::uint64_t(a.image_id)}));
      out.raw.push_back(posesynth::raw_features(est.keypoints));
      out.labels.push_back(c);
    }
  return out;
}

}  // namespace fixtures
