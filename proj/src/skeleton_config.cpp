#include "posesynth/skeleton_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "embedded_config.hpp"
#include "posesynth/errors.hpp"

namespace posesynth {
namespace {

using nlohmann::json;

Joint joint_or_throw(const std::string& name, const char* where) {
  auto j = joint_from_name(name);
  if (!j) throw ConfigError(std::string(where) + ": unknown joint '" + name + "'");
  return *j;
}

AxisTriple triple(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3)
    throw ConfigError(what + ": expected an array of three numbers");
  AxisTriple t{};
  for (int a = 0; a < 3; ++a) {
    if (!v[a].is_number()) throw ConfigError(what + ": expected an array of three numbers");
    t[a] = v[a].get<double>();
  }
  return t;
}

double number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw ConfigError(std::string("missing or non-numeric field '") + key + "'");
  return it->get<double>();
}

std::array<AxisTriple, kNumJoints> joint_table(const json& obj, const char* where,
                                               std::array<AxisTriple, kNumJoints> init = {}) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const Joint j = joint_or_throw(it.key(), where);
    init[idx(j)] = triple(it.value(), std::string(where) + "." + it.key());
  }
  return init;
}

}  // namespace

SkeletonConfig parse_skeleton_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("skeleton config must be a JSON object");
  if (doc.value("rotation_order", std::string("ZXY")) != "ZXY")
    throw ConfigError("only rotation_order \"ZXY\" is supported");

  SkeletonConfig cfg;
  cfg.default_limit_deg = doc.value("default_limit_deg", 45.0);
  if (!(cfg.default_limit_deg > 0.0)) throw ConfigError("default_limit_deg must be positive");

  if (doc.contains("profile")) {
    const json& p = doc["profile"];
    auto& pr = cfg.profile;
    pr.head = number(p, "head");
    pr.neck = number(p, "neck");
    pr.torso = number(p, "torso");
    pr.upper_arm = number(p, "upper_arm");
    pr.forearm = number(p, "forearm");
    pr.hip_width = number(p, "hip_width");
    pr.shoulder_width = number(p, "shoulder_width");
    pr.thigh = number(p, "thigh");
    pr.shin = number(p, "shin");
    pr.adult_head_torso_ratio = number(p, "adult_head_torso_ratio");
  }
  cfg.profile.validate();

  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a)
      cfg.limits.ranges[j][a] = AngleRange{-cfg.default_limit_deg, cfg.default_limit_deg};
  if (doc.contains("limits")) {
    const json& lim = doc["limits"];
    if (!lim.is_object()) throw ConfigError("limits must be an object");
    for (auto it = lim.begin(); it != lim.end(); ++it) {
      const Joint j = joint_or_throw(it.key(), "limits");
      for (auto ax = it.value().begin(); ax != it.value().end(); ++ax) {
        const std::string& axis = ax.key();
        int a = axis == "x" ? 0 : axis == "y" ? 1 : axis == "z" ? 2 : -1;
        if (a < 0) throw ConfigError("limits." + it.key() + ": unknown axis '" + axis + "'");
        const json& r = ax.value();
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
          throw ConfigError("limits." + it.key() + "." + axis + ": expected [min, max]");
        cfg.limits.set(j, a, {r[0].get<double>(), r[1].get<double>()});
      }
    }
  }
  cfg.limits.validate();

  const auto base = doc.contains("base_pose") ? joint_table(doc["base_pose"], "base_pose")
                                              : std::array<AxisTriple, kNumJoints>{};
  const auto eps = doc.contains("default_perturbation")
                       ? joint_table(doc["default_perturbation"], "default_perturbation")
                       : std::array<AxisTriple, kNumJoints>{};

  if (!doc.contains("templates") || !doc["templates"].is_array())
    throw ConfigError("skeleton config needs a templates array");
  std::array<bool, kNumCategories> seen{};
  for (const json& t : doc["templates"]) {
    PoseTemplate tmpl;
    if (!t.contains("id") || !t["id"].is_number_integer())
      throw ConfigError("template without integer id");
    tmpl.category_id = t["id"].get<int>();
    tmpl.name = t.value("name", std::string());
    tmpl.base.deg = t.contains("angles") ? joint_table(t["angles"], "template angles", base) : base;
    tmpl.perturbation =
        t.contains("perturbation") ? joint_table(t["perturbation"], "template perturbation", eps)
                                   : eps;
    tmpl.validate(cfg.limits);
    if (seen[tmpl.category_id])
      throw ConfigError("duplicate template id " + std::to_string(tmpl.category_id));
    seen[tmpl.category_id] = true;
    cfg.templates.push_back(std::move(tmpl));
  }
  for (int c = 0; c < kNumCategories; ++c)
    if (!seen[c]) throw ConfigError("missing template for category " + std::to_string(c));
  std::sort(cfg.templates.begin(), cfg.templates.end(),
            [](const PoseTemplate& a, const PoseTemplate& b) { return a.category_id < b.category_id; });
  return cfg;
}

SkeletonConfig load_skeleton_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open skeleton config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("skeleton config " + path.string() + ": " + e.what());
  }
  return parse_skeleton_config(doc);
}

const std::string& default_skeleton_config_text() {
  static const std::string text = embedded::kSkeletonJson;
  return text;
}

const SkeletonConfig& default_skeleton_config() {
  static const SkeletonConfig cfg = parse_skeleton_config(json::parse(default_skeleton_config_text()));
  return cfg;
}

std::vector<PoseTemplate> builtin_templates() { return default_skeleton_config().templates; }

}  // namespace posesynth
