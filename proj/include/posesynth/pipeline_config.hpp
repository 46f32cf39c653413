#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "posesynth/augment.hpp"
#include "posesynth/filter.hpp"
#include "posesynth/generation.hpp"
#include "posesynth/io.hpp"
#include "posesynth/mlp.hpp"
#include "posesynth/monitor.hpp"
#include "posesynth/prompt.hpp"
#include "posesynth/render.hpp"
#include "posesynth/skeleton_config.hpp"

namespace posesynth {

struct GeneratorConfig {
  std::string kind = "mock-identity";
  double drift_fraction = 0.2;
  long fail_every = 0;
  std::string exchange_dir;
  std::string command;
};

struct AugmentConfig {
  int copies = 2;  // augmented variants per sample
  AugmentSpec spec;
  bool write_images = false;
};

struct MonitorSimConfig {
  MonitorConfig machine;
  int episodes_per_class = 10;
  double lead_in_min_s = 1.0, lead_in_max_s = 3.0;
  double deviation_min_s = 3.0, deviation_max_s = 6.0;
};

struct PipelineConfig {
  std::uint64_t seed = 2024;
  int count_per_class = 120;
  std::string skeleton_path;    // empty: built-in
  std::string vocabulary_path;  // empty: built-in
  CameraModel camera;
  DepthRange depth_range;
  GeneratorConfig generator;
  ConditioningWeights conditioning;
  NoiseSpec noise;
  FilterThresholds filter;
  double val_ratio = 0.1;
  AugmentConfig augment;
  TrainConfig train;  // seed unused; derived from `seed`
  double pck_alpha = 0.2;
  MonitorSimConfig monitor;

  // Loaded from the paths above.
  SkeletonConfig skeleton;
  Vocabulary vocabulary;

  void validate() const;
};

// Keys absent from `doc` keep the built-in defaults; unknown keys are errors.
// Relative paths resolve against `base_dir`. Referenced files must exist.
PipelineConfig parse_pipeline_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig default_pipeline_config();

// Effective settings, with the skeleton and vocabulary inlined by content.
ojson config_to_json(const PipelineConfig& cfg);
// FNV-1a of the compact dump of config_to_json, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace posesynth
