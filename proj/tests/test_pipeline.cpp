#include <doctest.h>

#include <filesystem>

#include "posesynth/coco.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/io.hpp"
#include "posesynth/pipeline.hpp"
#include "posesynth/pipeline_config.hpp"
#include "posesynth/random.hpp"

using namespace posesynth;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("posesynth_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

PipelineConfig small_config(int count = 5) {
  PipelineConfig c = default_pipeline_config();
  c.count_per_class = count;
  c.train.epochs = 5;
  c.monitor.episodes_per_class = 1;
  return c;
}

StageResult front(const PipelineConfig& c, const fs::path& run) {
  StageResult r = cmd_gen_poses(c, run);
  if (r.exit_code == kExitOk) r = cmd_render_controls(c, run);
  if (r.exit_code == kExitOk) r = cmd_synth(c, run);
  return r;
}

}  // namespace

TEST_CASE("pipeline config: defaults") {
  const PipelineConfig c = default_pipeline_config();
  CHECK(c.seed == 2024);
  CHECK(c.count_per_class == 120);
  CHECK(c.train.batch_size == 64);
  CHECK(c.monitor.machine.debounce_frames == 15);
  CHECK(c.generator.kind == "mock-identity");
}

TEST_CASE("pipeline config: unknown and mistyped keys are rejected") {
  CHECK_THROWS_AS(parse_pipeline_config(json{{"sede", 1}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"filter", {{"drift_tau", 0.1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"seed", "many"}}), ConfigError);
  try {
    parse_pipeline_config(json{{"train", {{"epoch", 3}}}});
    FAIL("accepted an unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.epoch") != std::string::npos);
  }
}

TEST_CASE("pipeline config: partial documents keep defaults") {
  const PipelineConfig c = parse_pipeline_config(json{{"seed", 7}, {"filter", {{"drift", 0.1}}}});
  CHECK(c.seed == 7);
  CHECK(c.filter.drift == doctest::Approx(0.1));
  CHECK(c.filter.conf == doctest::Approx(0.5));
}

TEST_CASE("pipeline config: validation failures") {
  CHECK_THROWS_AS(parse_pipeline_config(json{{"count_per_class", 0}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"count_per_class", 90001}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"skeleton", "does/not/exist.json"}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"generator", {{"kind", "external"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"generator", {{"kind", "flux"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"filter", {{"conf", 1.5}}}}), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(json{{"conditioning", {{"pose", 0.4}, {"depth", 0.5}}}}), ConfigError);
}

TEST_CASE("pipeline config: the committed config file matches the built-in defaults") {
  const PipelineConfig f = load_pipeline_config(fs::path(POSESYNTH_SOURCE_DIR) / "config" / "pipeline.json");
  CHECK(config_hash(f) == config_hash(default_pipeline_config()));
}

TEST_CASE("pipeline config: hash is stable and sensitive") {
  const PipelineConfig a = default_pipeline_config();
  PipelineConfig b = default_pipeline_config();
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2025;
  CHECK(config_hash(a) != config_hash(b));

  TempDir d("hash");
  ojson skel = ojson::parse(read_text_file(fs::path(POSESYNTH_SOURCE_DIR) / "config" / "skeleton.json"));
  write_json_file(d.path / "same.json", skel);
  skel["profile"]["torso"] = 0.37;
  write_json_file(d.path / "taller.json", skel);
  const PipelineConfig same = parse_pipeline_config(json{{"skeleton", "same.json"}}, d.path);
  const PipelineConfig taller = parse_pipeline_config(json{{"skeleton", "taller.json"}}, d.path);
  CHECK(config_hash(same) == config_hash(a));
  CHECK(config_hash(taller) != config_hash(a));
}

TEST_CASE("gen-poses: count 5 gives 50 annotations, 5 per class, reproducible") {
  TempDir d1("gen1"), d2("gen2");
  const PipelineConfig c = small_config(5);
  CHECK(cmd_gen_poses(c, d1.path).exit_code == kExitOk);
  CHECK(cmd_gen_poses(c, d2.path).exit_code == kExitOk);
  const DatasetManifest m = read_coco(d1.path / "poses" / "annotations.json");
  CHECK(m.annotations.size() == 50);
  std::array<int, kNumCategories> per{};
  for (const auto& a : m.annotations) ++per[std::size_t(a.category_id)];
  for (int n : per) CHECK(n == 5);
  CHECK(m.config_hash == config_hash(c));
  for (const auto& im : m.images) CHECK(fs::exists(d1.path / "poses" / "provenance" / (std::to_string(im.id) + ".json")));
  CHECK(read_text_file(d1.path / "poses" / "annotations.json") == read_text_file(d2.path / "poses" / "annotations.json"));
  CHECK(read_text_file(d1.path / "poses" / "manifest.json") == read_text_file(d2.path / "poses" / "manifest.json"));
}

TEST_CASE("stages refuse missing or foreign inputs") {
  TempDir d("order");
  PipelineConfig c = small_config(1);
  CHECK_THROWS_AS(cmd_render_controls(c, d.path), Error);
  cmd_gen_poses(c, d.path);
  c.seed = 99;
  try {
    cmd_render_controls(c, d.path);
    FAIL("accepted poses produced under another config");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("config") != std::string::npos);
  }
}

TEST_CASE("synth: identity mock over 50 requests gives 50 successes") {
  TempDir d("identity");
  const PipelineConfig c = small_config(5);
  CHECK(front(c, d.path).exit_code == kExitOk);
  const json r = read_json_file(d.path / "synth" / "results.json");
  CHECK(r.at("succeeded").get<int>() == 50);
  CHECK(r.at("failed").get<int>() == 0);
  for (int i = 0; i < 50; ++i) CHECK(fs::exists(d.path / r.at("results")[std::size_t(i)].at("image").get<std::string>()));
}

TEST_CASE("synth: drift of 0.2 diagonal is rejected by the filter every time") {
  TempDir d("drift");
  PipelineConfig c = small_config(5);
  c.generator.kind = "mock-drift";
  c.generator.drift_fraction = 0.2;
  REQUIRE(front(c, d.path).exit_code == kExitOk);
  CHECK(cmd_filter(c, d.path, {}).exit_code == kExitOk);
  const json s = read_json_file(d.path / "filter" / "stats.json").at("stats");
  CHECK(s.at("accepted").get<int>() == 0);
  CHECK(s.at("rejected").get<int>() == 50);
  CHECK_THROWS_AS(cmd_build_dataset(c, d.path), Error);
}

TEST_CASE("synth: external mode with an empty exchange directory fails every item") {
  TempDir d("external");
  TempDir ex("exchange");
  PipelineConfig c = small_config(1);
  c.generator.kind = "external";
  c.generator.exchange_dir = ex.path.string();
  const StageResult r = front(c, d.path);
  CHECK(r.exit_code == kExitNoGeneration);
  CHECK(r.exit_code != kExitOk);
  const json res = read_json_file(d.path / "synth" / "results.json");
  CHECK(res.at("failed").get<int>() == 10);
}

TEST_CASE("filter: review export lists only borderline items") {
  TempDir d("review");
  const PipelineConfig c = small_config(3);
  REQUIRE(front(c, d.path).exit_code == kExitOk);
  CommandOptions opt;
  opt.review_export = true;
  cmd_filter(c, d.path, opt);
  REQUIRE(fs::exists(d.path / "filter" / "review.json"));
  const json rv = read_json_file(d.path / "filter" / "review.json");
  const json st = read_json_file(d.path / "filter" / "stats.json").at("stats");
  CHECK(rv.at("borderline").size() == st.at("borderline").get<std::size_t>());
}

TEST_CASE("run-all: train accuracy is at least validation accuracy, manifests hash their files") {
  TempDir d("runall");
  PipelineConfig c = small_config(12);
  c.train.epochs = 30;
  const StageResult r = run_all(c, d.path, {});
  REQUIRE(r.exit_code == kExitOk);
  const json e = read_json_file(d.path / "eval" / "evaluation.json");
  CHECK(e["classifier"]["train"]["accuracy"].get<double>() >= e["classifier"]["val"]["accuracy"].get<double>());

  for (const char* stage : kStageDirs) {
    const json m = read_json_file(d.path / stage / "manifest.json");
    CHECK(m.at("config_hash") == config_hash(c));
    for (const auto& f : m.at("files"))
      CHECK(f.at("fnv1a64").get<std::string>() ==
            hex64(fnv1a64(read_text_file(d.path / f.at("path").get<std::string>()))));
  }
  const json rep = read_json_file(d.path / "report.json");
  CHECK(rep.at("schema_version") == 1);
  CHECK(rep.at("config_hash") == config_hash(c));
  CHECK(rep.at("stages").size() == kStageDirs.size());
  CHECK(rep["monitor"]["fps_note"].get<std::string>().find("simulation") != std::string::npos);
}
