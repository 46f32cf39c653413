// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>

#include "fixtures.hpp"
#include "posesynth/category_rules.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/filter.hpp"
#include "posesynth/io.hpp"
#include "posesynth/metrics.hpp"
#include "posesynth/mlp.hpp"
#include "posesynth/monitor.hpp"
#include "posesynth/pipeline.hpp"
#include "posesynth/pipeline_config.hpp"
#include "posesynth/random.hpp"
#include "posesynth/render.hpp"

using namespace posesynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int n, const char* name, double budget_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > budget_s) {
    o.pass = false;
    o.detail += "; exceeded time budget";
  }
  failures += !o.pass;
  std::printf("%s  AC%-2d %-32s %s [%.1f s / %.0f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), s,
              budget_s);
  std::fflush(stdout);
}

std::string str(double v, const char* f = "%.4f") {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

// -------------------------------------------------------------- 1

Outcome constraint_soundness() {
  const auto& cfg = default_skeleton_config();
  long poses = 0, violations = 0;
  for (const auto& t : cfg.templates)
    for (std::uint64_t s = 0; s < 10000; ++s) {
      const PoseAngles p = perturb_template(t, cfg.limits, derive_seed(0xac1, {std::uint64_t(t.category_id), s}));
      ++poses;
      bool ok = true;
      for (std::size_t j = 0; j < kNumJoints; ++j)
        for (int a = 0; a < 3; ++a) {
          const auto& r = cfg.limits.ranges[j][std::size_t(a)];
          if (r && !(p.deg[j][std::size_t(a)] >= r->min_deg && p.deg[j][std::size_t(a)] <= r->max_deg)) ok = false;
        }
      violations += !ok;
    }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(poses) + " poses"};
}

// -------------------------------------------------------------- 2

Outcome renderer_determinism() {
  const auto& cfg = default_skeleton_config();
  const CameraModel cam;
  const LimbSpec spec = openpose_limb_spec(cam.width, cam.height);
  Rng rng(0xac2);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& t = cfg.templates[rng.below(10)];
    const Skeleton3D s = forward_kinematics(fixtures::tree(), perturb_template(t, cfg.limits, rng.next_u64()));
    const Keypoints2D k = project(s, cam);
    const auto p1 = content_hash(render_openpose(k, cam.width, cam.height, spec));
    const auto d1 = content_hash(render_depth(s, cam, cam.width, cam.height));
    const auto p2 = content_hash(render_openpose(k, cam.width, cam.height, spec));
    const auto d2 = content_hash(render_depth(s, cam, cam.width, cam.height));
    mismatches += (p1 != p2) + (d1 != d2);
  }
  return {mismatches == 0, std::to_string(mismatches) + " hash mismatches over 100 skeletons x 2 rasters"};
}

// -------------------------------------------------------------- 3

std::map<long, ReestimateResult> through_generator(const DatasetManifest& m, const std::string& kind, const NoiseSpec& noise) {
  const auto gen = make_generator(kind, 0.2, 0, "", "");
  RasterImage blank(512, 512);
  std::map<long, ReestimateResult> out;
  for (const auto& a : m.annotations) {
    GenerationRequest req;
    req.image_id = a.image_id;
    req.controls.pose = blank;
    req.gt_keypoints = a.keypoints;
    req.seed = std::uint64_t(a.image_id);
    const GenerationResult r = generate(req, *gen);
    if (!r.ok() || !r.depicted) throw Error("generator produced no keypoints for " + std::to_string(a.image_id));
    out[a.image_id] = mock_reestimate(*r.depicted, noise, derive_seed(0xac3, {std::uint64_t(a.image_id)}));
  }
  return out;
}

Outcome filter_correctness() {
  auto m = fixtures::sample_manifest(50, 0xac3);
  const long n = long(m.annotations.size());
  NoiseSpec clean;
  clean.sigma_px = 0.0;
  clean.drop_probability = 0.0;
  const FilterThresholds t;

  const auto ok = filter_dataset(through_generator(m, "mock-identity", clean), m, t);
  const bool a = ok.stats.accepted == n;

  const auto drift = filter_dataset(through_generator(m, "mock-drift", clean), m, t);
  const bool b = drift.stats.rejected == n && drift.stats.failed[kSpatialGate] == n;

  NoiseSpec low = clean;
  low.confidence = 0.4;
  const auto conf = filter_dataset(through_generator(m, "mock-identity", low), m, t);
  const bool c = conf.stats.rejected == n && conf.stats.failed[kConfidenceGate] == n;

  const auto clean_est = through_generator(m, "mock-identity", clean);
  Rng rng(0xac3);
  std::set<long> swapped;
  while (long(swapped.size()) < n / 10) {
    auto& ann = m.annotations[rng.below(m.annotations.size())];
    if (swapped.insert(ann.image_id).second) ann.category_id = (ann.category_id + 1 + int(rng.below(9))) % 10;
  }
  const auto sw = filter_dataset(clean_est, m, t);
  bool d = sw.stats.rejected == long(swapped.size()) && sw.stats.failed_only[kCategoryGate] == sw.stats.rejected;
  for (const auto& v : sw.verdicts)
    if (swapped.count(v.image_id) && (v.accepted || v.passed != std::array<bool, 3>{true, true, false})) d = false;

  return {a && b && c && d,
          "clean " + std::to_string(ok.stats.accepted) + "/" + std::to_string(n) + " accepted; drift " +
              std::to_string(drift.stats.failed[kSpatialGate]) + "/" + std::to_string(n) + " spatial; conf 0.4 " +
              std::to_string(conf.stats.failed[kConfidenceGate]) + "/" + std::to_string(n) + " confidence; swaps " +
              std::to_string(sw.stats.failed_only[kCategoryGate]) + "/" + std::to_string(swapped.size()) + " category"};
}

// -------------------------------------------------------------- 4

Outcome category_oracle() {
  int hits = 0;
  std::set<int> seen;
  for (int c = 0; c < kNumCategories; ++c) {
    const int got = infer_category(fixtures::canonical_keypoints(c));
    hits += got == c;
    seen.insert(got);
  }
  return {hits == kNumCategories && seen.size() == std::size_t(kNumCategories),
          std::to_string(hits) + "/10 templates recovered"};
}

// -------------------------------------------------------------- 5

double worst_gradient_error(MlpModel m, Mode mode, std::uint64_t dropout_seed, long& checked) {
  Rng rng(0xac5);
  Matrix x(3, kNumFeatures);
  for (auto& v : x.data) v = rng.normal();
  const std::vector<int> y = {1, 8, 4};
  const auto analytic = loss_and_gradient(m, x, y, mode, dropout_seed);
  auto params = parameter_tensors(m);
  const auto grads = parameter_tensors(analytic.grad);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t]->size(); ++i) {
      const double orig = (*params[t])[i];
      (*params[t])[i] = orig + h;
      const double lp = cross_entropy(forward(m, x, mode, dropout_seed), y);
      (*params[t])[i] = orig - h;
      const double lm = cross_entropy(forward(m, x, mode, dropout_seed), y);
      (*params[t])[i] = orig;
      const double num = (lp - lm) / (2 * h), a = (*grads[t])[i];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6}));
      ++checked;
    }
  return worst;
}

Outcome gradient_fidelity() {
  MlpModel m = init_model(0xac5);
  Rng rng(0xac51);
  for (BatchNorm* bn : {&m.bn1, &m.bn2})
    for (std::size_t j = 0; j < std::size_t(bn->size); ++j) {
      bn->gamma[j] = rng.uniform(0.5, 1.5);
      bn->beta[j] = rng.uniform(-0.5, 0.5);
      bn->running_mean[j] = rng.uniform(-0.3, 0.3);
      bn->running_var[j] = rng.uniform(0.5, 2.0);
    }
  long checked_eval = 0, checked_train = 0;
  const double e = worst_gradient_error(m, Mode::kEval, 0, checked_eval);
  const double t = worst_gradient_error(m, Mode::kTrain, 0xd0, checked_train);
  const bool all = checked_eval == kParamCount && checked_train == kParamCount;
  return {all && e < 1e-4 && t < 1e-4, "max relative error " + str(e, "%.2e") + " (eval BN), " + str(t, "%.2e") +
                                           " (batch BN + dropout) over " + std::to_string(checked_eval) + " parameters"};
}

// -------------------------------------------------------------- 6

Outcome parameter_count() {
  const MlpModel m = init_model(1);
  std::size_t sum = 0;
  for (const auto* p : parameter_tensors(m)) sum += p->size();
  return {m.param_count() == 11722 && sum == 11722 && sum < 12000,
          "reported " + std::to_string(m.param_count()) + ", tensors sum to " + std::to_string(sum)};
}

// -------------------------------------------------------------- 7, 8, 10

struct Runs {
  fs::path a, b;
  PipelineConfig cfg;
  double seconds_a = 0.0, seconds_b = 0.0;
  StageResult ra, rb;
};

Runs& runs() {
  static Runs r;
  return r;
}

Outcome desk_training() {
  Runs& r = runs();
  r.cfg = default_pipeline_config();
  r.a = fs::temp_directory_path() / "posesynth_acceptance_a";
  fs::remove_all(r.a);
  const auto t0 = std::chrono::steady_clock::now();
  r.ra = run_all(r.cfg, r.a, {});
  r.seconds_a = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.ra.exit_code != kExitOk) return {false, "pipeline exit " + std::to_string(r.ra.exit_code)};
  const auto e = read_json_file(r.a / "eval" / "evaluation.json");
  const auto d = read_json_file(r.a / "report.json").at("dataset");
  const double acc = e["classifier"]["val"]["accuracy"].get<double>();
  return {acc >= 0.90, "held-out accuracy " + str(acc) + " on " + std::to_string(d["val_images"].get<int>()) +
                           " images (train " + std::to_string(d["train_samples"].get<int>()) +
                           " samples incl. augmented, 120/class, 100 epochs)"};
}

Outcome quantization_retention() {
  const auto e = read_json_file(runs().a / "eval" / "evaluation.json");
  const double agree = e["quantized"]["agreement_with_float"].get<double>();
  const double drop = e["quantized"]["accuracy_drop"].get<double>();
  return {agree >= 0.99 && drop <= 0.01,
          "agreement " + str(agree) + ", accuracy drop " + str(100 * drop, "%.2f") + " pp"};
}

Outcome reproducibility() {
  Runs& r = runs();
  r.b = fs::temp_directory_path() / "posesynth_acceptance_b";
  fs::remove_all(r.b);
  const auto t0 = std::chrono::steady_clock::now();
  r.rb = run_all(r.cfg, r.b, {});
  r.seconds_b = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.rb.exit_code != kExitOk) return {false, "second pipeline exit " + std::to_string(r.rb.exit_code)};
  long compared = 0, differing = 0;
  std::string first;
  for (const auto& entry : fs::recursive_directory_iterator(r.a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), r.a);
    if (rel == fs::path("synth") / "timing.json") continue;  // wall-clock latencies
    ++compared;
    const fs::path other = r.b / rel;
    if (!fs::exists(other) || read_text_file(entry.path()) != read_text_file(other)) {
      ++differing;
      if (first.empty()) first = rel.string();
    }
  }
  long in_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(r.b)) in_b += entry.is_regular_file();
  const bool same_set = in_b == compared + 1;
  const double total = r.seconds_a + r.seconds_b;
  std::string d = std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ";
  if (!first.empty()) d += " (first: " + first + ")";
  d += ", two runs took " + str(total, "%.0f") + " s";
  return {differing == 0 && same_set && compared > 0 && total < 600.0, d};
}

// -------------------------------------------------------------- 9

Outcome metric_oracles() {
  std::vector<std::string> bad;
  const auto gt = fixtures::sample_annotation(0, 0, 0xac9);
  if (oks(gt.keypoints, gt.keypoints, gt.bbox.area()) != 1.0) bad.push_back("oks identity");

  Keypoints2D single{};
  single[5] = {100, 100, 2};
  const double area = 400.0, k = OksParams{}.kappa[5];
  Keypoints2D pred = single;
  pred[5].x += std::sqrt(2 * area * k * k);
  const double e1 = oks(pred, single, area);
  if (!(std::abs(e1 - std::exp(-1.0)) < 1e-9)) bad.push_back("oks e^-1");

  const auto g1 = fixtures::sample_annotation(1, 0, 0xac9), g2 = fixtures::sample_annotation(2, 0, 0xac9);
  const double ap = average_precision({{g1.image_id, g1.keypoints}}, {g1, g2});
  if (ap != 0.5) bad.push_back("ap");

  Keypoints2D g{};
  for (int j = 0; j < 13; ++j) g[std::size_t(j)] = {double(10 * j), 40.0, 2};
  Keypoints2D p = g;
  p[7].x += 10.0;  // exactly alpha * head length
  if (pck(p, g, 50.0, 0.2) != 1.0) bad.push_back("pck boundary");

  const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::vector<int> preds = {2, 0, 0, 1, 1, 1, 1, 2, 2};
  // Class 0: P 1, R 2/3. Class 1: P 3/4, R 1. Class 2: P 2/3, R 2/3.
  const double hand = (0.8 + 6.0 / 7.0 + 2.0 / 3.0) / 3.0;
  const double mf1 = classification_report(preds, labels, 3).macro_f1;
  if (!(std::abs(mf1 - hand) < 1e-12)) bad.push_back("macro-F1");

  std::string d = "OKS(gt,gt) 1, e^-1 case err " + str(std::abs(e1 - std::exp(-1.0)), "%.1e") + ", AP " + str(ap, "%.2f") +
                  ", macro-F1 " + str(mf1) + " vs " + str(hand);
  for (const auto& b : bad) d += "; failed " + b;
  return {bad.empty(), d};
}

// -------------------------------------------------------------- 11

Outcome monitor_machine() {
  const MonitorConfig cfg;  // N = 15, T = 1/22 s
  const double expected = cfg.debounce_frames * cfg.frame_period_s;
  auto by_label = [](const Keypoints2D& k) { return int(k[0].x); };
  auto stream = [](int lead, int cat, int len, int tail) {
    std::vector<Keypoints2D> f(std::size_t(lead + len + tail));
    for (int i = lead; i < lead + len; ++i) f[std::size_t(i)][0].x = cat;
    return f;
  };
  Rng rng(0xacb);
  int episodes = 0, exact = 0, sub = 0, silent = 0;
  double worst = 0.0;
  for (int c = 1; c < kNumCategories; ++c)
    for (int e = 0; e < 20; ++e) {
      const int lead = int(rng.below(200));
      const auto alerts = run_monitor(stream(lead, c, 40 + int(rng.below(100)), 30), by_label, cfg);
      ++episodes;
      if (alerts.size() == 1 && alerts[0].category == c) {
        const double lat = alerts[0].trigger_s - alerts[0].onset_s;
        worst = std::max(worst, std::abs(lat - expected));
        exact += std::abs(lat - expected) < 1e-12 && std::abs(alerts[0].onset_s - lead * cfg.frame_period_s) < 1e-12;
      }
      const int len = 1 + int(rng.below(std::uint64_t(cfg.debounce_frames - 1)));
      ++sub;
      silent += run_monitor(stream(lead, c, len, 30), by_label, cfg).empty();
    }

  // Averaging over detected instances only.
  std::vector<AlertEvent> log;
  double sum = 0.0;
  int detected = 0;
  for (int i = 0; i < 50; ++i) {
    const double onset = 10.0 * i;
    if (i % 5 == 4) {
      log.push_back({1, onset, std::nullopt});
    } else if (i % 7 == 6) {
      log.push_back({1, onset, onset + 45.0});  // outside the window
    } else {
      const double lat = 0.5 + 0.1 * i;
      log.push_back({1, onset, onset + lat});
      sum += lat;
      ++detected;
    }
  }
  const RecognitionStats s = recognition_stats(log);
  const bool stats_ok = s.detected == detected && std::abs(s.rate - double(detected) / 50.0) < 1e-12 &&
                        s.mean_latency_s && std::abs(*s.mean_latency_s - sum / detected) < 1e-12;

  return {exact == episodes && silent == sub && stats_ok,
          std::to_string(exact) + "/" + std::to_string(episodes) + " latencies = N*T (max err " + str(worst, "%.1e") +
              " s), " + std::to_string(silent) + "/" + std::to_string(sub) + " sub-debounce silent, recognition " +
              (stats_ok ? "matches" : "differs from") + " hand average"};
}

}  // namespace

int main() {
  criterion(1, "constraint soundness", 10, constraint_soundness);
  criterion(2, "renderer determinism", 30, renderer_determinism);
  criterion(3, "filter correctness", 60, filter_correctness);
  criterion(4, "category-rule oracle", 1, category_oracle);
  criterion(5, "gradient fidelity", 60, gradient_fidelity);
  criterion(6, "parameter count", 1, parameter_count);
  criterion(7, "desk-scale training", 180, desk_training);
  criterion(8, "quantization retention", 60, quantization_retention);
  criterion(9, "metric oracles", 10, metric_oracles);
  criterion(10, "end-to-end reproducibility", 600, reproducibility);
  criterion(11, "monitor state machine", 10, monitor_machine);
  fs::remove_all(runs().a);
  fs::remove_all(runs().b);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
