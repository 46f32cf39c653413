#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "posesynth/skeleton.hpp"

namespace posesynth {

// Everything skeleton-core needs from the editable configuration file. The
// file format is described in docs/formats.md.
struct SkeletonConfig {
  AnthropometricProfile profile;
  JointLimits limits;
  std::vector<PoseTemplate> templates;
  double default_limit_deg = 45.0;
};

SkeletonConfig parse_skeleton_config(const nlohmann::json& doc);
SkeletonConfig load_skeleton_config(const std::filesystem::path& path);

// The built-in configuration, identical to config/skeleton.json.
const std::string& default_skeleton_config_text();
const SkeletonConfig& default_skeleton_config();

// The ten built-in posture templates, category ids 0-9.
std::vector<PoseTemplate> builtin_templates();

}  // namespace posesynth
