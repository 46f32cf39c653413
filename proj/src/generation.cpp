#include "posesynth/generation.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "posesynth/coco.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/io.hpp"
#include "posesynth/random.hpp"
#include "posesynth/render.hpp"

namespace posesynth {
namespace {

GenerationResult failed(long id, std::string why) {
  GenerationResult r;
  r.image_id = id;
  r.failure = std::move(why);
  return r;
}

bool scheduled_failure(long id, long every) { return every > 0 && id % every == 0; }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

ojson keypoints_json(const Keypoints2D& kps) {
  ojson a = ojson::array();
  for (const auto& k : kps) {
    a.push_back(round2(k.x));
    a.push_back(round2(k.y));
    a.push_back(k.v);
  }
  return a;
}

}  // namespace

void ConditioningWeights::validate() const {
  if (!(pose > 0.0) || !(depth > 0.0)) throw ConfigError("conditioning weights must be positive");
  if (!(pose > depth)) throw ConfigError("pose conditioning weight must exceed the depth weight");
}

void NoiseSpec::validate() const {
  if (!(sigma_px >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) throw ConfigError("drop probability must be in [0, 1]");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw ConfigError("confidence must be in [0, 1]");
}

GenerationResult generate(const GenerationRequest& request, const Generator& generator) {
  const auto start = std::chrono::steady_clock::now();
  GenerationResult r;
  try {
    r = generator.run(request);
    if (!r.ok() && r.failure.empty()) r.failure = "generator returned no image";
    if (r.ok() && !r.failure.empty()) r.image.reset();
  } catch (const std::exception& e) {
    r = failed(request.image_id, e.what());
  } catch (...) {
    r = failed(request.image_id, "unknown generator exception");
  }
  r.image_id = request.image_id;
  r.generator = generator.name();
  r.version = generator.version();
  r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

GenerationResult IdentityGenerator::run(const GenerationRequest& request) const {
  if (scheduled_failure(request.image_id, fail_every_)) return failed(request.image_id, "scheduled mock failure");
  GenerationResult r;
  r.image_id = request.image_id;
  r.image = request.controls.pose;
  r.depicted = request.gt_keypoints;
  return r;
}

GenerationResult DriftGenerator::run(const GenerationRequest& request) const {
  if (scheduled_failure(request.image_id, fail_every_)) return failed(request.image_id, "scheduled mock failure");
  const BBox box = bbox_from_keypoints(request.gt_keypoints);
  const double shift = fraction_ * std::hypot(box.w, box.h);
  Rng rng(derive_seed(request.seed, {0xd21f7ULL}));
  Keypoints2D moved = request.gt_keypoints;
  for (auto& k : moved) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    if (!k.visible()) continue;
    k.x += shift * std::cos(angle);
    k.y += shift * std::sin(angle);
  }
  const int w = request.controls.pose.width, h = request.controls.pose.height;
  GenerationResult r;
  r.image_id = request.image_id;
  r.image = render_openpose(moved, w, h, openpose_limb_spec(w, h));
  r.depicted = moved;
  return r;
}

GenerationResult ExternalGenerator::run(const GenerationRequest& request) const {
  const std::string id = std::to_string(request.image_id);
  const auto req_dir = dir_ / "requests" / id;
  const auto res_dir = dir_ / "results" / id;
  ojson desc;
  desc["image_id"] = request.image_id;
  desc["seed"] = "0x" + hex64(request.seed);
  desc["prompt"] = request.controls.prompt;
  desc["negative_prompt"] = request.controls.negative_prompt;
  desc["weights"] = {{"pose", request.weights.pose}, {"depth", request.weights.depth}};
  desc["width"] = request.controls.pose.width;
  desc["height"] = request.controls.pose.height;
  desc["pose_image"] = "pose.png";
  desc["depth_image"] = "depth.png";
  desc["gt_keypoints"] = keypoints_json(request.gt_keypoints);
  write_json_file(req_dir / "request.json", desc);
  write_png(request.controls.pose, req_dir / "pose.png");
  write_png(request.controls.depth, req_dir / "depth.png");

  if (!command_.empty()) {
    std::filesystem::create_directories(res_dir);
    const std::string cmd = command_ + " " + shell_quote(req_dir.string()) + " " + shell_quote(res_dir.string());
    if (int rc = std::system(cmd.c_str()); rc != 0)
      return failed(request.image_id, "external command exited with status " + std::to_string(rc));
  }
  if (!std::filesystem::exists(res_dir / "image.png")) return failed(request.image_id, "no result image in exchange dir");

  GenerationResult r;
  r.image_id = request.image_id;
  try {
    r.image = read_png_rgb(res_dir / "image.png");
  } catch (const IoError& e) {
    return failed(request.image_id, e.what());
  }
  if (r.image->width != request.controls.pose.width || r.image->height != request.controls.pose.height)
    return failed(request.image_id, "result image size does not match the request");
  if (std::filesystem::exists(res_dir / "result.json")) {
    const auto doc = read_json_file(res_dir / "result.json");
    if (doc.contains("keypoints")) {
      const auto& kp = doc["keypoints"];
      if (!kp.is_array() || kp.size() != 3 * kNumKeypoints)
        return failed(request.image_id, "result.json keypoints must hold 51 numbers");
      Keypoints2D k{};
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        if (!kp[3 * i].is_number() || !kp[3 * i + 1].is_number() || !kp[3 * i + 2].is_number_integer())
          return failed(request.image_id, "result.json keypoints must be numeric");
        k[i] = {kp[3 * i].get<double>(), kp[3 * i + 1].get<double>(), kp[3 * i + 2].get<int>()};
      }
      r.depicted = k;
    }
  }
  return r;
}

std::unique_ptr<Generator> make_generator(const std::string& kind, double drift_fraction, long fail_every,
                                          const std::filesystem::path& exchange_dir, const std::string& command) {
  if (kind == "mock-identity") return std::make_unique<IdentityGenerator>(fail_every);
  if (kind == "mock-drift") return std::make_unique<DriftGenerator>(drift_fraction, fail_every);
  if (kind == "external") return std::make_unique<ExternalGenerator>(exchange_dir, command);
  throw ConfigError("unknown generator '" + kind + "' (expected mock-identity, mock-drift or external)");
}

ReestimateResult mock_reestimate(const Keypoints2D& depicted, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  ReestimateResult r;
  // The drop draw comes first so the noise stream does not depend on it.
  const bool dropped = rng.uniform() < noise.drop_probability;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const double dx = rng.normal(), dy = rng.normal();
    r.keypoints[k] = {depicted[k].x + noise.sigma_px * dx, depicted[k].y + noise.sigma_px * dy, 2};
    r.confidence[k] = dropped ? 0.0 : noise.confidence;
  }
  return r;
}

}  // namespace posesynth
