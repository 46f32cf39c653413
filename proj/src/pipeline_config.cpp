#include "posesynth/pipeline_config.hpp"

#include <set>

#include "embedded_config.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/random.hpp"

namespace posesynth {

namespace {

using json = nlohmann::json;

// Reads keys from one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("pipeline config: '" + path_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw ConfigError("pipeline config: unknown key '" + where(k) + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("pipeline config: '" + where(key) + "' has the wrong type");
    }
  }

  void range(const char* key, double& lo, double& hi) {
    std::vector<double> v{lo, hi};
    get(key, v);
    if (v.size() != 2) throw ConfigError("pipeline config: '" + where(key) + "' must be [min, max]");
    lo = v[0];
    hi = v[1];
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void PipelineConfig::validate() const {
  if (count_per_class < 1) throw ConfigError("count_per_class must be at least 1");
  // Pose indices from 90000 upward belong to the monitor simulation.
  if (count_per_class > 90000) throw ConfigError("count_per_class must be at most 90000");
  camera.validate();
  if (!(depth_range.near_m > 0.0 && depth_range.far_m > depth_range.near_m))
    throw ConfigError("depth_range_m must satisfy 0 < near < far");
  if (generator.kind != "mock-identity" && generator.kind != "mock-drift" && generator.kind != "external")
    throw ConfigError("generator.kind must be mock-identity, mock-drift or external, got '" + generator.kind + "'");
  if (generator.fail_every < 0) throw ConfigError("generator.fail_every must be >= 0");
  if (!(generator.drift_fraction >= 0.0)) throw ConfigError("generator.drift_fraction must be >= 0");
  if (generator.kind == "external") {
    if (generator.exchange_dir.empty()) throw ConfigError("generator.exchange_dir is required for external mode");
    if (!std::filesystem::is_directory(generator.exchange_dir))
      throw ConfigError("generator.exchange_dir does not exist: " + generator.exchange_dir);
  }
  conditioning.validate();
  noise.validate();
  filter.validate();
  if (!(val_ratio > 0.0 && val_ratio < 1.0)) throw ConfigError("split.val_ratio must be in (0, 1)");
  if (augment.copies < 0) throw ConfigError("augment.copies must be >= 0");
  augment.spec.validate();
  train.validate();
  if (!(pck_alpha > 0.0)) throw ConfigError("evaluation.pck_alpha must be positive");
  monitor.machine.validate();
  if (monitor.episodes_per_class < 1 || monitor.episodes_per_class > 999)
    throw ConfigError("monitor.episodes_per_class must be in [1, 999]");
  if (!(monitor.lead_in_min_s >= 0.0 && monitor.lead_in_max_s >= monitor.lead_in_min_s))
    throw ConfigError("monitor.lead_in_s must be an ordered non-negative range");
  if (!(monitor.deviation_min_s > 0.0 && monitor.deviation_max_s >= monitor.deviation_min_s))
    throw ConfigError("monitor.deviation_s must be an ordered positive range");
}

PipelineConfig parse_pipeline_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  {
    Section root(doc, "");
    int version = 1;
    root.get("version", version);
    if (version != 1) throw ConfigError("pipeline config: unsupported version " + std::to_string(version));
    root.get("seed", c.seed);
    root.get("count_per_class", c.count_per_class);
    root.get("skeleton", c.skeleton_path);
    root.get("vocabulary", c.vocabulary_path);
    if (const json* j = root.child("camera")) {
      Section s(*j, "camera");
      s.get("focal_px", c.camera.focal_px);
      s.get("cx", c.camera.cx);
      s.get("cy", c.camera.cy);
      s.get("distance_m", c.camera.distance_m);
      s.get("mount_height_m", c.camera.mount_height_m);
      s.get("width", c.camera.width);
      s.get("height", c.camera.height);
    }
    root.range("depth_range_m", c.depth_range.near_m, c.depth_range.far_m);
    if (const json* j = root.child("generator")) {
      Section s(*j, "generator");
      s.get("kind", c.generator.kind);
      s.get("drift_fraction", c.generator.drift_fraction);
      s.get("fail_every", c.generator.fail_every);
      s.get("exchange_dir", c.generator.exchange_dir);
      s.get("command", c.generator.command);
    }
    if (const json* j = root.child("conditioning")) {
      Section s(*j, "conditioning");
      s.get("pose", c.conditioning.pose);
      s.get("depth", c.conditioning.depth);
    }
    if (const json* j = root.child("noise")) {
      Section s(*j, "noise");
      s.get("sigma_px", c.noise.sigma_px);
      s.get("drop_probability", c.noise.drop_probability);
      s.get("confidence", c.noise.confidence);
    }
    if (const json* j = root.child("filter")) {
      Section s(*j, "filter");
      s.get("conf", c.filter.conf);
      s.get("drift", c.filter.drift);
    }
    if (const json* j = root.child("split")) {
      Section s(*j, "split");
      s.get("val_ratio", c.val_ratio);
    }
    if (const json* j = root.child("augment")) {
      Section s(*j, "augment");
      s.get("copies", c.augment.copies);
      s.range("scale", c.augment.spec.scale_min, c.augment.spec.scale_max);
      s.range("crop", c.augment.spec.crop_min, c.augment.spec.crop_max);
      s.get("rotation_deg", c.augment.spec.rotation_deg);
      s.get("write_images", c.augment.write_images);
    }
    if (const json* j = root.child("train")) {
      Section s(*j, "train");
      s.get("epochs", c.train.epochs);
      s.get("lr", c.train.lr);
      s.get("beta1", c.train.beta1);
      s.get("beta2", c.train.beta2);
      s.get("epsilon", c.train.epsilon);
      s.get("batch_size", c.train.batch_size);
    }
    if (const json* j = root.child("evaluation")) {
      Section s(*j, "evaluation");
      s.get("pck_alpha", c.pck_alpha);
    }
    if (const json* j = root.child("monitor")) {
      Section s(*j, "monitor");
      s.get("debounce_frames", c.monitor.machine.debounce_frames);
      double fps = 1.0 / c.monitor.machine.frame_period_s;
      s.get("fps", fps);
      if (!(fps > 0.0)) throw ConfigError("monitor.fps must be positive");
      c.monitor.machine.frame_period_s = 1.0 / fps;
      s.get("episodes_per_class", c.monitor.episodes_per_class);
      s.range("lead_in_s", c.monitor.lead_in_min_s, c.monitor.lead_in_max_s);
      s.range("deviation_s", c.monitor.deviation_min_s, c.monitor.deviation_max_s);
    }
  }

  auto load = [&](std::string& rel, const char* what) {
    if (rel.empty()) return std::filesystem::path();
    const auto p = resolve(rel, base_dir);
    if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(what) + " file not found: " + p.string());
    rel = p.string();
    return p;
  };
  const auto skel = load(c.skeleton_path, "skeleton");
  c.skeleton = skel.empty() ? default_skeleton_config() : load_skeleton_config(skel);
  const auto vocab = load(c.vocabulary_path, "vocabulary");
  c.vocabulary = vocab.empty() ? default_vocabulary() : load_vocabulary(vocab);
  if (!c.generator.exchange_dir.empty()) c.generator.exchange_dir = resolve(c.generator.exchange_dir, base_dir).string();
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = read_json_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_pipeline_config(doc, path.parent_path());
}

PipelineConfig default_pipeline_config() { return parse_pipeline_config(nlohmann::json::parse(embedded::kPipelineJson)); }

ojson config_to_json(const PipelineConfig& c) {
  ojson j;
  j["version"] = 1;
  j["seed"] = c.seed;
  j["count_per_class"] = c.count_per_class;
  const std::string skel_text = c.skeleton_path.empty() ? default_skeleton_config_text()
                                                        : read_text_file(c.skeleton_path);
  const std::string vocab_text = c.vocabulary_path.empty() ? std::string(embedded::kVocabularyJson)
                                                           : read_text_file(c.vocabulary_path);
  // Parsed then re-dumped so formatting differences do not change the hash.
  j["skeleton"] = ojson::parse(skel_text);
  j["vocabulary"] = ojson::parse(vocab_text);
  j["camera"] = {{"focal_px", c.camera.focal_px}, {"cx", c.camera.cx},       {"cy", c.camera.cy},
                 {"distance_m", c.camera.distance_m}, {"mount_height_m", c.camera.mount_height_m},
                 {"width", c.camera.width},       {"height", c.camera.height}};
  j["depth_range_m"] = {c.depth_range.near_m, c.depth_range.far_m};
  j["generator"] = {{"kind", c.generator.kind},
                    {"drift_fraction", c.generator.drift_fraction},
                    {"fail_every", c.generator.fail_every},
                    {"exchange_dir", c.generator.exchange_dir},
                    {"command", c.generator.command}};
  j["conditioning"] = {{"pose", c.conditioning.pose}, {"depth", c.conditioning.depth}};
  j["noise"] = {{"sigma_px", c.noise.sigma_px},
                {"drop_probability", c.noise.drop_probability},
                {"confidence", c.noise.confidence}};
  j["filter"] = {{"conf", c.filter.conf}, {"drift", c.filter.drift}};
  j["split"] = {{"val_ratio", c.val_ratio}};
  j["augment"] = {{"copies", c.augment.copies},
                  {"scale", {c.augment.spec.scale_min, c.augment.spec.scale_max}},
                  {"crop", {c.augment.spec.crop_min, c.augment.spec.crop_max}},
                  {"rotation_deg", c.augment.spec.rotation_deg},
                  {"write_images", c.augment.write_images}};
  j["train"] = {{"epochs", c.train.epochs}, {"lr", c.train.lr},           {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},   {"epsilon", c.train.epsilon}, {"batch_size", c.train.batch_size}};
  j["evaluation"] = {{"pck_alpha", c.pck_alpha}};
  j["monitor"] = {{"debounce_frames", c.monitor.machine.debounce_frames},
                  {"fps", 1.0 / c.monitor.machine.frame_period_s},
                  {"episodes_per_class", c.monitor.episodes_per_class},
                  {"lead_in_s", {c.monitor.lead_in_min_s, c.monitor.lead_in_max_s}},
                  {"deviation_s", {c.monitor.deviation_min_s, c.monitor.deviation_max_s}}};
  return j;
}

std::string config_hash(const PipelineConfig& cfg) { return hex64(fnv1a64(config_to_json(cfg).dump())); }

}  // namespace posesynth
