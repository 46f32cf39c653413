#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "posesynth/pipeline_config.hpp"

namespace posesynth {

inline constexpr const char* kVersion = "1.0.0";

// Process exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;         // a stage failed; message on stderr
inline constexpr int kExitUsage = 2;         // bad arguments or configuration
inline constexpr int kExitNoGeneration = 3;  // synth produced no image at all

// Stage directories under the run directory, in pipeline order.
inline constexpr std::array<const char*, 8> kStageDirs = {"poses",   "controls", "synth", "filter",
                                                          "dataset", "model",    "eval",  "monitor"};

struct CommandOptions {
  bool review_export = false;  // filter: dump borderline verdicts to filter/review.json
};

struct StageResult {
  int exit_code = kExitOk;
  std::string summary;  // one or more human-readable lines
};

// Each command reads only earlier stages' outputs, writes only its own
// directory plus <stage>/manifest.json, and refuses inputs produced under a
// different config hash.
StageResult cmd_gen_poses(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_render_controls(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_synth(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_filter(const PipelineConfig& cfg, const std::filesystem::path& run, const CommandOptions& opt = {});
StageResult cmd_build_dataset(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_train_classifier(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_evaluate(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_monitor_sim(const PipelineConfig& cfg, const std::filesystem::path& run);
StageResult cmd_report(const PipelineConfig& cfg, const std::filesystem::path& run);

// All stages in order; stops at the first nonzero exit code.
StageResult run_all(const PipelineConfig& cfg, const std::filesystem::path& run, const CommandOptions& opt = {});

}  // namespace posesynth
