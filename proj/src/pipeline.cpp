#include "posesynth/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "posesynth/category_rules.hpp"
#include "posesynth/coco.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/features.hpp"
#include "posesynth/metrics.hpp"
#include "posesynth/random.hpp"
#include "posesynth/raster.hpp"
#include "posesynth/sampling.hpp"

namespace posesynth {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Salts for derive_seed so that every random stream is independent.
constexpr std::uint64_t kPromptSalt = 0x9f0, kGenerateSalt = 0x5e, kReestimateSalt = 0xe57, kSplitSalt = 0x5b1,
                        kAugmentSalt = 0xa46, kInitSalt = 0x3a1, kTrainSalt = 0x3a2, kMonitorSalt = 0x40;
constexpr long kMonitorIndexBase = 90000;  // pose indices reserved for the monitor simulation
constexpr int kAugmentAttempts = 10;

fs::path stage_path(const fs::path& run, const char* stage) { return run / stage; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// <stage>/manifest.json lists every file the stage wrote with its FNV-1a hash.
void write_stage_manifest(const fs::path& run, const char* stage, const std::string& hash,
                          std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  ojson list = ojson::array();
  for (const auto& f : files)
    list.push_back({{"path", f}, {"fnv1a64", hex64(fnv1a64(read_text_file(run / f)))}});
  write_json_file(stage_path(run, stage) / "manifest.json",
                  ojson{{"stage", stage}, {"config_hash", hash}, {"version", kVersion}, {"files", list}});
}

void require_stage(const fs::path& run, const char* stage, const std::string& hash) {
  const fs::path p = stage_path(run, stage) / "manifest.json";
  if (!fs::exists(p)) throw Error(std::string("stage '") + stage + "' has not been run in " + run.string());
  const json m = read_json_file(p);
  const std::string got = m.value("config_hash", std::string());
  if (got != hash)
    throw Error(std::string("stage '") + stage + "' was produced with config " + got + ", current config is " + hash);
}

ojson keypoints_json(const Keypoints2D& k) {
  ojson a = ojson::array();
  for (const auto& p : k) {
    a.push_back(p.x);
    a.push_back(p.y);
    a.push_back(p.v);
  }
  return a;
}

Keypoints2D keypoints_from(const json& a) {
  if (!a.is_array() || a.size() != 3 * kNumKeypoints) throw ManifestError(ManifestError::Kind::kSchema, "keypoints", -1, "expected 51 numbers");
  Keypoints2D k;
  for (std::size_t i = 0; i < kNumKeypoints; ++i)
    k[i] = {a[3 * i].get<double>(), a[3 * i + 1].get<double>(), a[3 * i + 2].get<int>()};
  return k;
}

// NaN (invisible joint) is stored as null.
ojson features_json(const FeatureVector& f) {
  ojson a = ojson::array();
  for (double v : f) a.push_back(std::isnan(v) ? ojson(nullptr) : ojson(v));
  return a;
}

FeatureVector features_from(const json& a) {
  if (!a.is_array() || a.size() != kNumFeatures) throw Error("feature record must hold 18 values");
  FeatureVector f{};
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    f[i] = a[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : a[i].get<double>();
  return f;
}

ojson read_ojson(const fs::path& p) { return ojson::parse(read_text_file(p)); }

std::string id_str(long id) { return std::to_string(id); }

fs::path sidecar_path(const fs::path& run, long id) { return stage_path(run, "poses") / "provenance" / (id_str(id) + ".json"); }

Skeleton3D skeleton_from_sidecar(const json& side) {
  Skeleton3D s;
  const json& j = side.at("joints_camera_m");
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto v = j.at(std::string(kJointNames[i])).get<std::vector<double>>();
    s.joints[i] = {v.at(0), v.at(1), v.at(2)};
  }
  return s;
}

struct FeatureSet {
  std::vector<FeatureVector> raw;
  std::vector<int> labels;
  std::vector<int> copy;  // 0 for the unaugmented original
};

FeatureSet originals(const FeatureSet& s) {
  FeatureSet o;
  for (std::size_t i = 0; i < s.raw.size(); ++i)
    if (s.copy[i] == 0) {
      o.raw.push_back(s.raw[i]);
      o.labels.push_back(s.labels[i]);
      o.copy.push_back(0);
    }
  return o;
}

FeatureSet read_features(const fs::path& p) {
  const json j = read_json_file(p);
  FeatureSet fs_;
  for (const auto& s : j.at("samples")) {
    fs_.raw.push_back(features_from(s.at("raw")));
    fs_.labels.push_back(s.at("category").get<int>());
    fs_.copy.push_back(s.at("copy").get<int>());
  }
  return fs_;
}

std::vector<FeatureVector> normalized(const FeatureSet& s, const NormalizationStats& st) {
  std::vector<FeatureVector> out;
  out.reserve(s.raw.size());
  for (const auto& f : s.raw) out.push_back(normalize(f, st));
  return out;
}

struct LoadedModel {
  MlpModel model;
  QuantizedModel quantized;
  NormalizationStats stats;
};

LoadedModel load_model(const fs::path& run) {
  const json m = read_json_file(stage_path(run, "model") / "model.json");
  const json q = read_json_file(stage_path(run, "model") / "quantized.json");
  return {model_from_json(m.at("model")), quantized_from_json(q.at("quantized")), stats_from_json(m.at("normalization"))};
}

std::vector<int> predictions(const MlpModel& m, const std::vector<FeatureVector>& x) {
  std::vector<int> out;
  for (const auto& f : x) out.push_back(predict(m, f).category);
  return out;
}

std::vector<int> predictions(const QuantizedModel& m, const std::vector<FeatureVector>& x) {
  std::vector<int> out;
  for (const auto& f : x) out.push_back(predict(m, f).category);
  return out;
}

std::string report_table(const ClassificationReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "  %-18s %9s %9s %9s %8s\n", "class", "precision", "recall", "f1", "support");
  os << line;
  for (int c = 0; c < r.num_classes; ++c) {
    std::snprintf(line, sizeof line, "  %-18s %9.3f %9.3f %9.3f %8ld%s\n", std::string(kCategoryNames[std::size_t(c)]).c_str(),
                  r.precision[std::size_t(c)], r.recall[std::size_t(c)], r.f1[std::size_t(c)], r.support[std::size_t(c)],
                  r.absent[std::size_t(c)] ? "  (absent)" : "");
    os << line;
  }
  std::snprintf(line, sizeof line, "  accuracy %.4f  macro-F1 %.4f\n", r.accuracy, r.macro_f1);
  os << line;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- gen-poses

StageResult cmd_gen_poses(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  const KinematicTree tree = build_tree(cfg.skeleton.profile, cfg.camera);
  DatasetManifest m;
  m.split = "all";
  m.config_hash = hash;
  std::vector<std::string> files;
  std::array<long, kNumCategories> per_class{};
  for (int c = 0; c < kNumCategories; ++c)
    for (long i = 0; i < cfg.count_per_class; ++i) {
      const long id = image_id_for(c, i);
      try {
        const PoseSample s = sample_pose(cfg.skeleton, tree, cfg.camera, c, i, cfg.seed);
        const PromptAttributes prompt = compose_prompt(cfg.vocabulary, derive_seed(s.seed, {kPromptSalt}));
        m.images.push_back({id, "synth/" + id_str(id) + ".png", cfg.camera.width, cfg.camera.height,
                            Provenance{c, s.seed, prompt.id()}});
        m.annotations.push_back(make_annotation(id, id, c, s.keypoints));
        ++per_class[std::size_t(c)];

        ojson side;
        side["image_id"] = id;
        side["category_id"] = c;
        side["template"] = kCategoryNames[std::size_t(c)];
        side["seed"] = "0x" + hex64(s.seed);
        ojson angles, joints;
        for (std::size_t j = 0; j < kNumJoints; ++j) {
          angles[std::string(kJointNames[j])] = s.angles.deg[j];
          const Vec3& p = s.skeleton.joints[j];
          joints[std::string(kJointNames[j])] = {p.x, p.y, p.z};
        }
        side["angles_deg"] = angles;
        side["joints_camera_m"] = joints;
        side["prompt"] = {{"id", prompt.id()},
                          {"text", prompt.text()},
                          {"negative", prompt.negative_prompt},
                          {"index", prompt.index}};
        const fs::path p = sidecar_path(run, id);
        write_json_file(p, side);
        files.push_back(fs::relative(p, run).string());
      } catch (const Error& e) {
        throw Error("sample " + id_str(id) + ": " + e.what());
      }
    }
  validate(m);
  write_coco(m, stage_path(run, "poses") / "annotations.json");
  files.push_back("poses/annotations.json");
  write_stage_manifest(run, "poses", hash, files);
  return {kExitOk, "gen-poses: " + std::to_string(m.annotations.size()) + " annotations (" +
                       std::to_string(cfg.count_per_class) + " per class)"};
}

// ---------------------------------------------------------------- render-controls

StageResult cmd_render_controls(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "poses", hash);
  const DatasetManifest m = read_coco(stage_path(run, "poses") / "annotations.json");
  const LimbSpec spec = openpose_limb_spec(cfg.camera.width, cfg.camera.height);
  ojson index = ojson::array();
  std::vector<std::string> files;
  for (const auto& a : m.annotations) {
    const RasterImage pose = render_openpose(a.keypoints, cfg.camera.width, cfg.camera.height, spec);
    const Skeleton3D skel = skeleton_from_sidecar(read_json_file(sidecar_path(run, a.image_id)));
    const DepthMap depth = render_depth(skel, cfg.camera, cfg.camera.width, cfg.camera.height, cfg.depth_range);
    const std::string pose_rel = "controls/" + id_str(a.image_id) + "_pose.png";
    const std::string depth_rel = "controls/" + id_str(a.image_id) + "_depth.png";
    write_png(pose, run / pose_rel);
    write_png(depth, run / depth_rel);
    files.push_back(pose_rel);
    files.push_back(depth_rel);
    index.push_back({{"image_id", a.image_id},
                     {"pose", pose_rel},
                     {"depth", depth_rel},
                     {"pose_hash", hex64(content_hash(pose))},
                     {"depth_hash", hex64(content_hash(depth))}});
  }
  write_json_file(stage_path(run, "controls") / "index.json",
                  ojson{{"config_hash", hash},
                        {"depth_range_m", {cfg.depth_range.near_m, cfg.depth_range.far_m}},
                        {"controls", index}});
  files.push_back("controls/index.json");
  write_stage_manifest(run, "controls", hash, files);
  return {kExitOk, "render-controls: " + std::to_string(index.size()) + " pose/depth pairs"};
}

// ---------------------------------------------------------------- synth

StageResult cmd_synth(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "poses", hash);
  require_stage(run, "controls", hash);
  const DatasetManifest m = read_coco(stage_path(run, "poses") / "annotations.json");
  const auto gen = make_generator(cfg.generator.kind, cfg.generator.drift_fraction, cfg.generator.fail_every,
                                  cfg.generator.exchange_dir, cfg.generator.command);
  ojson results = ojson::array();
  ojson timing = ojson::array();
  std::vector<std::string> files;
  long ok = 0, failed = 0;
  for (const auto& a : m.annotations) {
    const json side = read_json_file(sidecar_path(run, a.image_id));
    GenerationRequest req;
    req.image_id = a.image_id;
    req.controls.pose = read_png_rgb(stage_path(run, "controls") / (id_str(a.image_id) + "_pose.png"));
    req.controls.depth = read_png_depth(stage_path(run, "controls") / (id_str(a.image_id) + "_depth.png"),
                                        cfg.depth_range.near_m, cfg.depth_range.far_m);
    req.controls.prompt = side.at("prompt").at("text").get<std::string>();
    req.controls.negative_prompt = side.at("prompt").at("negative").get<std::string>();
    req.weights = cfg.conditioning;
    req.gt_keypoints = a.keypoints;
    req.seed = derive_seed(m.find_image(a.image_id)->provenance.seed, {kGenerateSalt});
    const GenerationResult r = generate(req, *gen);
    ojson e{{"image_id", a.image_id}, {"ok", r.ok()}, {"generator", r.generator}, {"version", r.version}};
    if (r.ok()) {
      const std::string rel = "synth/" + id_str(a.image_id) + ".png";
      write_png(*r.image, run / rel);
      files.push_back(rel);
      e["image"] = rel;
      e["image_hash"] = hex64(content_hash(*r.image));
      e["depicted"] = r.depicted ? keypoints_json(*r.depicted) : ojson(nullptr);
      ++ok;
    } else {
      e["failure"] = r.failure;
      ++failed;
    }
    results.push_back(e);
    timing.push_back({{"image_id", a.image_id}, {"latency_ms", r.latency_ms}});
  }
  write_json_file(stage_path(run, "synth") / "results.json",
                  ojson{{"config_hash", hash}, {"requests", m.annotations.size()}, {"succeeded", ok},
                        {"failed", failed}, {"results", results}});
  files.push_back("synth/results.json");
  // Wall-clock latencies are the one non-reproducible output; kept out of the manifest.
  write_json_file(stage_path(run, "synth") / "timing.json", ojson{{"timing", timing}});
  write_stage_manifest(run, "synth", hash, files);
  StageResult res{ok > 0 ? kExitOk : kExitNoGeneration,
                  "synth: " + std::to_string(ok) + " succeeded, " + std::to_string(failed) + " failed (" +
                      gen->name() + ")"};
  return res;
}

// ---------------------------------------------------------------- filter

StageResult cmd_filter(const PipelineConfig& cfg, const fs::path& run, const CommandOptions& opt) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "poses", hash);
  require_stage(run, "synth", hash);
  const DatasetManifest all = read_coco(stage_path(run, "poses") / "annotations.json");
  const json synth = read_json_file(stage_path(run, "synth") / "results.json");
  std::map<long, ReestimateResult> est;
  std::vector<long> ids;
  long generation_failed = 0, no_keypoints = 0;
  ojson reest = ojson::array();
  for (const auto& r : synth.at("results")) {
    const long id = r.at("image_id").get<long>();
    if (!r.at("ok").get<bool>()) {
      ++generation_failed;
      continue;
    }
    if (r.at("depicted").is_null()) {
      ++no_keypoints;
      continue;
    }
    const ReestimateResult e =
        mock_reestimate(keypoints_from(r.at("depicted")), cfg.noise, derive_seed(cfg.seed, {std::uint64_t(id), kReestimateSalt}));
    est[id] = e;
    ids.push_back(id);
    reest.push_back({{"image_id", id}, {"keypoints", keypoints_json(e.keypoints)}, {"confidence", e.confidence}});
  }
  const DatasetManifest gts = subset(all, ids, "all");
  const CategoryRules rules = calibrate_category_rules(cfg.skeleton, cfg.camera);
  FilterOutcome out = filter_dataset(est, gts, cfg.filter, rules);
  out.accepted.config_hash = hash;
  out.rejected.config_hash = hash;

  std::vector<std::string> files = {"filter/accepted.json", "filter/rejected.json", "filter/verdicts.json",
                                    "filter/stats.json", "filter/reestimates.json"};
  write_coco(out.accepted, stage_path(run, "filter") / "accepted.json");
  write_coco(out.rejected, stage_path(run, "filter") / "rejected.json");
  ojson verdicts = ojson::array(), review = ojson::array();
  for (const auto& v : out.verdicts) {
    verdicts.push_back(verdict_to_json(v));
    if (is_borderline(v, cfg.filter)) review.push_back(verdict_to_json(v));
  }
  write_json_file(stage_path(run, "filter") / "verdicts.json", ojson{{"config_hash", hash}, {"verdicts", verdicts}});
  ojson stats = stats_to_json(out.stats);
  stats["generation_failed"] = generation_failed;
  stats["no_keypoints"] = no_keypoints;
  stats["borderline"] = review.size();
  stats["thresholds"] = {{"conf", cfg.filter.conf}, {"drift", cfg.filter.drift}};
  stats["category_rules"] = rules_to_json(rules);
  write_json_file(stage_path(run, "filter") / "stats.json", ojson{{"config_hash", hash}, {"stats", stats}});
  write_json_file(stage_path(run, "filter") / "reestimates.json", ojson{{"config_hash", hash}, {"reestimates", reest}});
  if (opt.review_export) {
    write_json_file(stage_path(run, "filter") / "review.json", ojson{{"config_hash", hash}, {"borderline", review}});
    files.push_back("filter/review.json");
  }
  write_stage_manifest(run, "filter", hash, files);
  return {kExitOk, "filter: " + std::to_string(out.stats.accepted) + " accepted, " +
                       std::to_string(out.stats.rejected) + " rejected (confidence " +
                       std::to_string(out.stats.failed[kConfidenceGate]) + ", spatial " +
                       std::to_string(out.stats.failed[kSpatialGate]) + ", category " +
                       std::to_string(out.stats.failed[kCategoryGate]) + "), rejection rate " +
                       fmt("%.4f", out.stats.rejection_rate())};
}

// ---------------------------------------------------------------- build-dataset

StageResult cmd_build_dataset(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "filter", hash);
  const DatasetManifest acc = read_coco(stage_path(run, "filter") / "accepted.json");
  if (acc.annotations.size() < 2)
    throw Error("only " + std::to_string(acc.annotations.size()) + " accepted samples; see filter/stats.json");
  auto [train, val] = stratified_split(acc, 1.0 - cfg.val_ratio, cfg.val_ratio, derive_seed(cfg.seed, {kSplitSalt}));
  if (train.annotations.empty() || val.annotations.empty())
    throw Error("split of " + std::to_string(acc.annotations.size()) + " accepted samples left an empty " +
                (train.annotations.empty() ? "train" : "validation") + " set; raise count_per_class or split.val_ratio");
  train.config_hash = val.config_hash = hash;
  write_coco(train, stage_path(run, "dataset") / "train.json");
  write_coco(val, stage_path(run, "dataset") / "val.json");
  std::vector<std::string> files = {"dataset/train.json", "dataset/val.json", "dataset/features_train.json",
                                    "dataset/features_val.json", "dataset/normalization.json"};
  const int w = cfg.camera.width, h = cfg.camera.height;
  long skipped = 0;
  std::vector<FeatureVector> train_raw;

  // Held-out images are evaluated as generated; only training sees augmented copies.
  auto build = [&](const DatasetManifest& split, const char* name, int copies) {
    ojson samples = ojson::array();
    for (const auto& a : split.annotations) {
      std::optional<RasterImage> image;
      if (cfg.augment.write_images && fs::exists(run / "synth" / (id_str(a.image_id) + ".png")))
        image = read_png_rgb(run / "synth" / (id_str(a.image_id) + ".png"));
      for (int copy = 0; copy <= copies; ++copy) {
        std::optional<AugmentParams> params;
        std::optional<FeatureVector> raw;
        for (int attempt = 0; attempt < (copy == 0 ? 1 : kAugmentAttempts) && !raw; ++attempt) {
          Keypoints2D k = a.keypoints;
          if (copy > 0) {
            params = sample_augment_params(cfg.augment.spec, w, h,
                                           derive_seed(cfg.seed, {kAugmentSalt, std::uint64_t(a.image_id),
                                                                  std::uint64_t(copy), std::uint64_t(attempt)}));
            k = augment_keypoints(k, *params, w, h);
          }
          try {
            raw = raw_features(k);
          } catch (const FeatureError&) {
          }
        }
        if (!raw) {
          ++skipped;
          continue;
        }
        if (image && params) {
          const Augmented aug = apply_augment(*image, a.keypoints, *params);
          write_png(aug.image, stage_path(run, "dataset") / "images" / (id_str(a.image_id) + "_" + std::to_string(copy) + ".png"));
          files.push_back("dataset/images/" + id_str(a.image_id) + "_" + std::to_string(copy) + ".png");
        }
        if (std::string(name) == "train") train_raw.push_back(*raw);
        samples.push_back({{"image_id", a.image_id},
                           {"copy", copy},
                           {"category", a.category_id},
                           {"augment", params ? params_to_json(*params) : ojson(nullptr)},
                           {"raw", features_json(*raw)}});
      }
    }
    write_json_file(stage_path(run, "dataset") / (std::string("features_") + name + ".json"),
                    ojson{{"config_hash", hash}, {"split", name}, {"samples", samples}});
    return samples.size();
  };
  const std::size_t n_train = build(train, "train", cfg.augment.copies);
  const std::size_t n_val = build(val, "val", 0);
  const NormalizationStats stats = fit_normalizer(train_raw, "train");
  write_json_file(stage_path(run, "dataset") / "normalization.json", ojson{{"config_hash", hash}, {"normalization", stats_to_json(stats)}});
  write_stage_manifest(run, "dataset", hash, files);
  return {kExitOk, "build-dataset: " + std::to_string(train.annotations.size()) + " train / " +
                       std::to_string(val.annotations.size()) + " val images, " + std::to_string(n_train) + " / " +
                       std::to_string(n_val) + " feature samples, " + std::to_string(skipped) + " skipped"};
}

// ---------------------------------------------------------------- train-classifier

StageResult cmd_train_classifier(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "dataset", hash);
  const FeatureSet tr = read_features(stage_path(run, "dataset") / "features_train.json");
  const FeatureSet va = read_features(stage_path(run, "dataset") / "features_val.json");
  const NormalizationStats stats =
      stats_from_json(read_json_file(stage_path(run, "dataset") / "normalization.json").at("normalization"));
  const auto xtr = normalized(tr, stats), xva = normalized(va, stats);

  MlpModel model = init_model(derive_seed(cfg.seed, {kInitSalt}));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, {kTrainSalt});
  const TrainHistory hist = train(model, to_matrix(xtr), tr.labels, to_matrix(xva), va.labels, tc);
  const QuantizedModel q = quantize_int8(model, xtr);

  const ojson norm = stats_to_json(stats);
  write_json_file(stage_path(run, "model") / "model.json",
                  ojson{{"config_hash", hash}, {"param_count", model.param_count()}, {"model", model_to_json(model)},
                        {"normalization", norm}});
  write_json_file(stage_path(run, "model") / "quantized.json",
                  ojson{{"config_hash", hash}, {"quantized", quantized_to_json(q)}, {"normalization", norm}});
  ojson epochs = ojson::array();
  for (const auto& e : hist.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}});
  write_json_file(stage_path(run, "model") / "history.json",
                  ojson{{"config_hash", hash}, {"initial_loss", hist.initial_loss}, {"epochs", epochs}});
  write_stage_manifest(run, "model", hash, {"model/model.json", "model/quantized.json", "model/history.json"});
  const auto& last = hist.epochs.back();
  return {kExitOk, "train-classifier: " + std::to_string(hist.epochs.size()) + " epochs, loss " +
                       fmt("%.4f", hist.initial_loss) + " -> " + fmt("%.4f", last.train_loss) + ", val accuracy " +
                       fmt("%.4f", last.val_accuracy)};
}

// ---------------------------------------------------------------- evaluate

StageResult cmd_evaluate(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "model", hash);
  require_stage(run, "filter", hash);
  const LoadedModel lm = load_model(run);
  const FeatureSet tr_all = read_features(stage_path(run, "dataset") / "features_train.json");
  const FeatureSet tr = originals(tr_all);
  const FeatureSet va = read_features(stage_path(run, "dataset") / "features_val.json");
  const auto xtr = normalized(tr, lm.stats), xva = normalized(va, lm.stats);
  const ClassificationReport raug = classification_report(predictions(lm.model, normalized(tr_all, lm.stats)), tr_all.labels);

  const auto pv = predictions(lm.model, xva), pt = predictions(lm.model, xtr), pq = predictions(lm.quantized, xva);
  const ClassificationReport rv = classification_report(pv, va.labels);
  const ClassificationReport rt = classification_report(pt, tr.labels);
  const ClassificationReport rq = classification_report(pq, va.labels);
  long agree = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) agree += pv[i] == pq[i];

  // Keypoint quality of the re-estimates against ground truth, over every
  // image that reached the filter.
  const DatasetManifest all = read_coco(stage_path(run, "poses") / "annotations.json");
  const json reest = read_json_file(stage_path(run, "filter") / "reestimates.json");
  std::map<long, Keypoints2D> dets;
  std::vector<AnnotationRecord> gts;
  for (const auto& r : reest.at("reestimates")) {
    const long id = r.at("image_id").get<long>();
    dets[id] = keypoints_from(r.at("keypoints"));
    gts.push_back(*all.annotation_for(id));
  }
  const double ap = average_precision(dets, gts);
  const PckSummary pck = pck_dataset(dets, gts, cfg.pck_alpha);

  ojson j;
  j["config_hash"] = hash;
  j["classifier"] = {{"val", report_to_json(rv)},
                     {"train", report_to_json(rt)},
                     {"train_with_augmented_accuracy", raug.accuracy}};
  j["quantized"] = {{"val", report_to_json(rq)},
                    {"agreement_with_float", pv.empty() ? 0.0 : double(agree) / double(pv.size())},
                    {"accuracy_drop", rv.accuracy - rq.accuracy}};
  j["keypoints"] = {{"images", gts.size()},
                    {"ap", ap},
                    {"pck", pck.value()},
                    {"pck_alpha", cfg.pck_alpha},
                    {"pck_skipped_images", pck.skipped_images},
                    {"pck_head_segment", "2 x |nose - ear midpoint|"}};
  write_json_file(stage_path(run, "eval") / "evaluation.json", j);
  write_stage_manifest(run, "eval", hash, {"eval/evaluation.json"});

  std::string s = "evaluate: validation split (float MLP)\n" + report_table(rv);
  s += "  train accuracy " + fmt("%.4f", rt.accuracy) + ", INT8 val accuracy " + fmt("%.4f", rq.accuracy) +
       ", INT8/float agreement " + fmt("%.4f", pv.empty() ? 0.0 : double(agree) / double(pv.size())) + "\n";
  s += "  re-estimate keypoint AP " + fmt("%.4f", ap) + ", PCK@" + fmt("%.2f", cfg.pck_alpha) + " " + fmt("%.4f", pck.value());
  return {kExitOk, s};
}

// ---------------------------------------------------------------- monitor-sim

StageResult cmd_monitor_sim(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  require_stage(run, "model", hash);
  const LoadedModel lm = load_model(run);
  const KinematicTree tree = build_tree(cfg.skeleton.profile, cfg.camera);
  const MonitorConfig& mc = cfg.monitor.machine;
  const double fps = 1.0 / mc.frame_period_s;

  // A dropped detection leaves no usable keypoints.
  auto frame_of = [&](const Keypoints2D& pose, std::uint64_t seed) {
    const ReestimateResult r = mock_reestimate(pose, cfg.noise, seed);
    Keypoints2D k = r.keypoints;
    for (std::size_t j = 0; j < kNumKeypoints; ++j)
      if (!(r.confidence[j] > cfg.filter.conf) || !in_frame(k[j].x, k[j].y, cfg.camera.width, cfg.camera.height))
        k[j].v = 0;
    return k;
  };
  const FrameClassifier classify = mlp_frame_classifier(lm.model, lm.stats);
  const FrameClassifier classify_q = quantized_frame_classifier(lm.quantized, lm.stats);

  std::vector<AlertEvent> events, events_q;
  ojson ev_json = ojson::array();
  long false_alerts = 0;
  for (int c = 1; c < kNumCategories; ++c)
    for (int e = 0; e < cfg.monitor.episodes_per_class; ++e) {
      Rng rng(derive_seed(cfg.seed, {kMonitorSalt, std::uint64_t(c), std::uint64_t(e)}));
      const long lead = std::lround(rng.uniform(cfg.monitor.lead_in_min_s, cfg.monitor.lead_in_max_s) * fps);
      const long dev = std::lround(rng.uniform(cfg.monitor.deviation_min_s, cfg.monitor.deviation_max_s) * fps);
      const long index = kMonitorIndexBase + long(c) * 1000 + e;
      const PoseSample upright = sample_pose(cfg.skeleton, tree, cfg.camera, 0, index, cfg.seed);
      const PoseSample bad = sample_pose(cfg.skeleton, tree, cfg.camera, c, index, cfg.seed);
      Episode ep{c, lead, {}};
      for (long f = 0; f < lead + dev; ++f)
        ep.frames.push_back(frame_of(f < lead ? upright.keypoints : bad.keypoints,
                                     derive_seed(cfg.seed, {kMonitorSalt, std::uint64_t(index), std::uint64_t(f)})));
      const auto alerts = run_monitor(ep.frames, classify, mc);
      const auto alerts_q = run_monitor(ep.frames, classify_q, mc);
      for (const auto& a : alerts) false_alerts += a.frame < lead;
      const AlertEvent ev = score_episode(ep, alerts, mc);
      events.push_back(ev);
      events_q.push_back(score_episode(ep, alerts_q, mc));
      ev_json.push_back({{"category", c},
                         {"episode", e},
                         {"frames", lead + dev},
                         {"onset_s", ev.onset_s},
                         {"trigger_s", ev.trigger_s ? ojson(*ev.trigger_s) : ojson(nullptr)}});
    }
  const RecognitionStats all = recognition_stats(events), all_q = recognition_stats(events_q);
  ojson per = ojson::object();
  for (const auto& [c, s] : recognition_by_category(events)) per[std::string(kCategoryNames[std::size_t(c)])] = recognition_to_json(s);
  ojson stats{{"config_hash", hash},
              {"debounce_frames", mc.debounce_frames},
              {"fps", fps},
              {"fps_note", "simulation parameter; no pose network runs here"},
              {"window_s", kRecognitionWindowS},
              {"overall", recognition_to_json(all)},
              {"overall_int8", recognition_to_json(all_q)},
              {"false_alerts_during_lead_in", false_alerts},
              {"per_category", per}};
  write_json_file(stage_path(run, "monitor") / "events.json", ojson{{"config_hash", hash}, {"events", ev_json}});
  write_json_file(stage_path(run, "monitor") / "stats.json", stats);
  write_stage_manifest(run, "monitor", hash, {"monitor/events.json", "monitor/stats.json"});
  std::string s = "monitor-sim: recognition rate " + fmt("%.4f", all.rate) + " over " + std::to_string(all.events) +
                  " episodes";
  if (all.mean_latency_s) s += ", mean latency " + fmt("%.3f", *all.mean_latency_s) + " s";
  s += ", " + std::to_string(false_alerts) + " false alerts";
  return {kExitOk, s};
}

// ---------------------------------------------------------------- report

StageResult cmd_report(const PipelineConfig& cfg, const fs::path& run) {
  const std::string hash = config_hash(cfg);
  ojson r;
  r["schema_version"] = 1;
  r["config_hash"] = hash;
  r["versions"] = {{"posesynth", kVersion}, {"generator", cfg.generator.kind}};
  ojson stages = ojson::array();
  for (const char* s : kStageDirs) {
    const fs::path p = stage_path(run, s) / "manifest.json";
    if (!fs::exists(p)) continue;
    const ojson m = read_ojson(p);
    if (m.value("config_hash", std::string()) != hash) continue;
    stages.push_back(s);
  }
  r["stages"] = stages;
  auto has = [&](const char* s) { return std::find(stages.begin(), stages.end(), ojson(s)) != stages.end(); };

  if (has("poses")) {
    const DatasetManifest m = read_coco(stage_path(run, "poses") / "annotations.json");
    std::vector<long> per(kNumCategories, 0);
    for (const auto& a : m.annotations) ++per[std::size_t(a.category_id)];
    r["poses"] = {{"annotations", m.annotations.size()}, {"per_class", per}};
  }
  if (has("synth")) {
    const ojson s = read_ojson(stage_path(run, "synth") / "results.json");
    r["synth"] = {{"requests", s.at("requests")}, {"succeeded", s.at("succeeded")}, {"failed", s.at("failed")}};
  }
  if (has("filter")) r["filter"] = read_ojson(stage_path(run, "filter") / "stats.json").at("stats");
  if (has("dataset")) {
    const auto tr = read_ojson(stage_path(run, "dataset") / "features_train.json").at("samples").size();
    const auto va = read_ojson(stage_path(run, "dataset") / "features_val.json").at("samples").size();
    r["dataset"] = {{"train_images", read_coco(stage_path(run, "dataset") / "train.json").images.size()},
                    {"val_images", read_coco(stage_path(run, "dataset") / "val.json").images.size()},
                    {"train_samples", tr},
                    {"val_samples", va},
                    {"augment_copies", cfg.augment.copies}};
  }
  if (has("model")) {
    const ojson h = read_ojson(stage_path(run, "model") / "history.json");
    const ojson& last = h.at("epochs").back();
    r["training"] = {{"param_count", read_ojson(stage_path(run, "model") / "model.json").at("param_count")},
                     {"epochs", h.at("epochs").size()},
                     {"initial_loss", h.at("initial_loss")},
                     {"final_train_loss", last.at("train_loss")},
                     {"final_train_accuracy", last.at("train_accuracy")},
                     {"final_val_accuracy", last.at("val_accuracy")}};
  }
  if (has("eval")) {
    const ojson e = read_ojson(stage_path(run, "eval") / "evaluation.json");
    r["evaluation"] = {{"val_accuracy", e["classifier"]["val"]["accuracy"]},
                       {"val_macro_f1", e["classifier"]["val"]["macro_f1"]},
                       {"train_accuracy", e["classifier"]["train"]["accuracy"]},
                       {"int8_val_accuracy", e["quantized"]["val"]["accuracy"]},
                       {"int8_agreement", e["quantized"]["agreement_with_float"]},
                       {"keypoint_ap", e["keypoints"]["ap"]},
                       {"keypoint_pck", e["keypoints"]["pck"]},
                       {"pck_alpha", e["keypoints"]["pck_alpha"]}};
  }
  if (has("monitor")) {
    const ojson m = read_ojson(stage_path(run, "monitor") / "stats.json");
    r["monitor"] = {{"fps", m.at("fps")},
                    {"fps_note", m.at("fps_note")},
                    {"debounce_frames", m.at("debounce_frames")},
                    {"overall", m.at("overall")},
                    {"overall_int8", m.at("overall_int8")},
                    {"false_alerts_during_lead_in", m.at("false_alerts_during_lead_in")},
                    {"per_category", m.at("per_category")}};
  }
  write_json_file(run / "report.json", r);
  std::string s = "report: " + (run / "report.json").string() + " (" + std::to_string(stages.size()) + " stages)";
  return {kExitOk, s};
}

StageResult run_all(const PipelineConfig& cfg, const fs::path& run, const CommandOptions& opt) {
  StageResult total;
  auto step = [&](const char* name, auto&& fn) {
    StageResult r;
    try {
      r = fn();
    } catch (const Error& e) {
      throw Error(std::string(name) + ": " + e.what());
    }
    total.summary += r.summary + "\n";
    total.exit_code = r.exit_code;
    return r.exit_code == kExitOk;
  };
  step("gen-poses", [&] { return cmd_gen_poses(cfg, run); }) &&
      step("render-controls", [&] { return cmd_render_controls(cfg, run); }) &&
      step("synth", [&] { return cmd_synth(cfg, run); }) && step("filter", [&] { return cmd_filter(cfg, run, opt); }) &&
      step("build-dataset", [&] { return cmd_build_dataset(cfg, run); }) &&
      step("train-classifier", [&] { return cmd_train_classifier(cfg, run); }) &&
      step("evaluate", [&] { return cmd_evaluate(cfg, run); }) &&
      step("monitor-sim", [&] { return cmd_monitor_sim(cfg, run); }) &&
      step("report", [&] { return cmd_report(cfg, run); });
  if (!total.summary.empty()) total.summary.pop_back();
  return total;
}

}  // namespace posesynth
