#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "posesynth/keypoints.hpp"
#include "posesynth/raster.hpp"

namespace posesynth {

struct ControlBundle {
  RasterImage pose;
  DepthMap depth;
  std::string prompt;
  std::string negative_prompt;
};

// Pose-control and depth-control strengths. The pose signal must dominate.
struct ConditioningWeights {
  double pose = 1.1;
  double depth = 0.5;

  void validate() const;  // throws ConfigError unless both > 0 and pose > depth
};

struct GenerationRequest {
  long image_id = 0;
  ControlBundle controls;
  ConditioningWeights weights;
  Keypoints2D gt_keypoints{};
  std::uint64_t seed = 0;
};

struct GenerationResult {
  long image_id = 0;
  std::optional<RasterImage> image;
  std::string failure;  // set iff image is empty
  std::string generator;
  std::string version;
  double latency_ms = 0.0;
  // Where the body actually ended up in the image, when the generator knows.
  // Mocks always report it; it stands in for what a pose network would see.
  std::optional<Keypoints2D> depicted;

  bool ok() const { return image.has_value(); }
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  // May throw; generate() below turns exceptions into failure markers.
  virtual GenerationResult run(const GenerationRequest& request) const = 0;
};

// Calls the generator, never throws, fills provenance and latency.
GenerationResult generate(const GenerationRequest& request, const Generator& generator);

// Returns the pose raster itself. `fail_every` > 0 fails every id divisible by it.
class IdentityGenerator : public Generator {
 public:
  explicit IdentityGenerator(long fail_every = 0) : fail_every_(fail_every) {}
  std::string name() const override { return "mock-identity"; }
  std::string version() const override { return "1"; }
  GenerationResult run(const GenerationRequest& request) const override;

 private:
  long fail_every_;
};

// Moves every visible keypoint by `fraction` of the gt bbox diagonal in a
// seeded random direction and renders the moved skeleton.
class DriftGenerator : public Generator {
 public:
  explicit DriftGenerator(double fraction = 0.2, long fail_every = 0)
      : fraction_(fraction), fail_every_(fail_every) {}
  std::string name() const override { return "mock-drift"; }
  std::string version() const override { return "1"; }
  GenerationResult run(const GenerationRequest& request) const override;

 private:
  double fraction_;
  long fail_every_;
};

// File-exchange boundary for an out-of-process model. For each request it
// writes <dir>/requests/<id>/{request.json,pose.png,depth.png}; if a command
// is configured it runs `<command> <request dir> <result dir>`; it then reads
// <dir>/results/<id>/image.png plus an optional result.json. A missing or
// unreadable result is a failure for that id. docs/formats.md has the fields.
class ExternalGenerator : public Generator {
 public:
  explicit ExternalGenerator(std::filesystem::path exchange_dir, std::string command = {})
      : dir_(std::move(exchange_dir)), command_(std::move(command)) {}
  std::string name() const override { return "external"; }
  std::string version() const override { return "file-exchange-1"; }
  GenerationResult run(const GenerationRequest& request) const override;

 private:
  std::filesystem::path dir_;
  std::string command_;
};

std::unique_ptr<Generator> make_generator(const std::string& kind, double drift_fraction, long fail_every,
                                          const std::filesystem::path& exchange_dir, const std::string& command);

struct NoiseSpec {
  double sigma_px = 2.0;
  double drop_probability = 0.01;  // chance the whole detection fails
  double confidence = 0.85;

  void validate() const;
};

struct ReestimateResult {
  Keypoints2D keypoints{};  // v = 2 for every point
  std::array<double, kNumKeypoints> confidence{};
};

// Stand-in for a pose network run on the generated image: adds Gaussian
// pixel noise to the depicted keypoints. A dropped detection reports
// confidence 0 everywhere.
ReestimateResult mock_reestimate(const Keypoints2D& depicted, const NoiseSpec& noise, std::uint64_t seed);

}  // namespace posesynth
