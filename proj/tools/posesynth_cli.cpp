#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "posesynth/errors.hpp"
#include "posesynth/pipeline.hpp"
#include "posesynth/pipeline_config.hpp"

using namespace posesynth;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> count_per_class;
  std::optional<int> epochs;
  std::optional<std::string> generator, exchange_dir;
  std::optional<int> augment_copies;
  std::vector<double> augment_scale, augment_crop;
  std::optional<double> augment_rotation;
  bool augment_images = false;
};

void apply(const Overrides& o, PipelineConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.count_per_class) c.count_per_class = *o.count_per_class;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.generator) c.generator.kind = *o.generator;
  if (o.exchange_dir) c.generator.exchange_dir = *o.exchange_dir;
  if (o.augment_copies) c.augment.copies = *o.augment_copies;
  if (o.augment_scale.size() == 2) {
    c.augment.spec.scale_min = o.augment_scale[0];
    c.augment.spec.scale_max = o.augment_scale[1];
  }
  if (o.augment_crop.size() == 2) {
    c.augment.spec.crop_min = o.augment_crop[0];
    c.augment.spec.crop_max = o.augment_crop[1];
  }
  if (o.augment_rotation) c.augment.spec.rotation_deg = *o.augment_rotation;
  if (o.augment_images) c.augment.write_images = true;
  c.validate();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posesynth: synthetic sitting-posture data pipeline"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, run_dir = "run";
  Overrides o;
  CommandOptions opt;
  app.add_option("-c,--config", config_path, "pipeline JSON (built-in defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("-r,--run-dir", run_dir, "directory receiving every stage output")->capture_default_str();
  app.add_option("--seed", o.seed, "override the global seed");
  app.add_option("--count-per-class", o.count_per_class, "override samples per category");
  app.add_option("--epochs", o.epochs, "override training epochs");
  app.add_option("--generator", o.generator, "mock-identity | mock-drift | external")
      ->check(CLI::IsMember({"mock-identity", "mock-drift", "external"}));
  app.add_option("--exchange-dir", o.exchange_dir, "request/result directory for the external generator");
  app.add_option("--augment", o.augment_copies, "augmented copies per sample");
  app.add_option("--augment-scale", o.augment_scale, "resolution jitter range MIN MAX")->expected(2);
  app.add_option("--augment-crop", o.augment_crop, "crop fraction range MIN MAX")->expected(2);
  app.add_option("--augment-rotation", o.augment_rotation, "max micro-rotation in degrees");
  app.add_flag("--augment-images", o.augment_images, "also write augmented PNGs (needs synth images)");

  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {{"gen-poses", "sample constrained poses, write COCO annotations and provenance"},
                      {"render-controls", "rasterize pose skeleton and depth control images"},
                      {"synth", "run the image generator over every control pair"},
                      {"filter", "re-estimate keypoints and apply the acceptance gates"},
                      {"build-dataset", "split, augment and extract posture features"},
                      {"train-classifier", "train the MLP and its INT8 counterpart"},
                      {"evaluate", "classification, AP and PCK on the held-out split"},
                      {"monitor-sim", "simulate posture streams through the alert state machine"},
                      {"report", "collect stage outputs into report.json"},
                      {"run-all", "every stage in order"}};
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->fallthrough();
    if (std::string(c.name) == "filter" || std::string(c.name) == "run-all")
      sub->add_flag("--review-export", opt.review_export, "write borderline items to filter/review.json");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    PipelineConfig cfg = config_path.empty() ? default_pipeline_config() : load_pipeline_config(config_path);
    apply(o, cfg);
    const std::filesystem::path run(run_dir);
    StageResult r;
    if (cmd == "gen-poses") r = cmd_gen_poses(cfg, run);
    else if (cmd == "render-controls") r = cmd_render_controls(cfg, run);
    else if (cmd == "synth") r = cmd_synth(cfg, run);
    else if (cmd == "filter") r = cmd_filter(cfg, run, opt);
    else if (cmd == "build-dataset") r = cmd_build_dataset(cfg, run);
    else if (cmd == "train-classifier") r = cmd_train_classifier(cfg, run);
    else if (cmd == "evaluate") r = cmd_evaluate(cfg, run);
    else if (cmd == "monitor-sim") r = cmd_monitor_sim(cfg, run);
    else if (cmd == "report") r = cmd_report(cfg, run);
    else r = run_all(cfg, run, opt);
    std::cout << r.summary << "\n";
    if (r.exit_code != kExitOk) std::cerr << cmd << ": stage did not complete (exit " << r.exit_code << ")\n";
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << cmd << ": " << e.what() << "\n";
    return kExitError;
  }
}
