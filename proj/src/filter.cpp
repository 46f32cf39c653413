#include "posesynth/filter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "posesynth/errors.hpp"

namespace posesynth {

void FilterThresholds::validate() const {
  if (!(conf > 0.0 && conf < 1.0)) throw ConfigError("confidence threshold must lie in (0, 1)");
  if (!(drift > 0.0)) throw ConfigError("drift threshold must be positive");
}

FilterVerdict evaluate_gates(const ReestimateResult& est, const AnnotationRecord& gt, const FilterThresholds& t,
                             const CategoryRules& rules) {
  const double diag = std::hypot(gt.bbox.w, gt.bbox.h);
  if (!(diag > 0.0)) throw FilterError("annotation " + std::to_string(gt.id) + " has a zero bbox diagonal");
  FilterVerdict v;
  v.image_id = gt.image_id;
  v.target_category = gt.category_id;
  v.min_confidence = *std::min_element(est.confidence.begin(), est.confidence.end());
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    if (!gt.keypoints[k].visible()) continue;
    const double d = std::hypot(est.keypoints[k].x - gt.keypoints[k].x, est.keypoints[k].y - gt.keypoints[k].y);
    v.max_drift = std::max(v.max_drift, d / diag);
  }
  v.predicted_category = infer_category(est.keypoints, rules);
  v.passed[kConfidenceGate] = v.min_confidence > t.conf;
  v.passed[kSpatialGate] = v.max_drift < t.drift;
  v.passed[kCategoryGate] = v.predicted_category == gt.category_id;
  v.accepted = v.passed[0] && v.passed[1] && v.passed[2];
  return v;
}

bool is_borderline(const FilterVerdict& v, const FilterThresholds& t) {
  return std::abs(v.min_confidence - t.conf) <= 0.1 * t.conf || std::abs(v.max_drift - t.drift) <= 0.1 * t.drift;
}

FilterOutcome filter_dataset(const std::map<long, ReestimateResult>& results, const DatasetManifest& gts,
                             const FilterThresholds& t, const CategoryRules& rules) {
  t.validate();
  std::set<long> annotated;
  std::vector<long> orphans;
  for (const auto& a : gts.annotations) {
    annotated.insert(a.image_id);
    if (!results.count(a.image_id)) orphans.push_back(a.image_id);
  }
  for (const auto& [id, r] : results)
    if (!annotated.count(id)) orphans.push_back(id);
  if (!orphans.empty()) {
    std::sort(orphans.begin(), orphans.end());
    std::string list;
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) list += (i ? ", " : "") + std::to_string(orphans[i]);
    if (orphans.size() > 20) list += ", ...";
    throw FilterError(std::to_string(orphans.size()) + " image ids lack a partner: " + list);
  }

  FilterOutcome out;
  std::vector<long> keep, drop;
  std::vector<AnnotationRecord> anns = gts.annotations;
  std::sort(anns.begin(), anns.end(),
            [](const AnnotationRecord& a, const AnnotationRecord& b) { return a.image_id < b.image_id; });
  for (const auto& a : anns) {
    const FilterVerdict v = evaluate_gates(results.at(a.image_id), a, t, rules);
    auto& s = out.stats;
    ++s.total;
    int fails = 0;
    for (int g = 0; g < 3; ++g)
      if (!v.passed[g]) {
        ++s.failed[g];
        ++fails;
      }
    if (fails == 1)
      for (int g = 0; g < 3; ++g) s.failed_only[g] += !v.passed[g];
    if (v.accepted) {
      ++s.accepted;
      keep.push_back(a.image_id);
    } else {
      ++s.rejected;
      drop.push_back(a.image_id);
    }
    out.verdicts.push_back(v);
  }
  out.accepted = subset(gts, keep, gts.split);
  out.rejected = subset(gts, drop, gts.split);
  return out;
}

ojson stats_to_json(const GateStats& s) {
  ojson j;
  j["total"] = s.total;
  j["accepted"] = s.accepted;
  j["rejected"] = s.rejected;
  j["rejection_rate"] = s.rejection_rate();
  ojson failed, only;
  for (int g = 0; g < 3; ++g) {
    failed[kGateNames[g]] = s.failed[g];
    only[kGateNames[g]] = s.failed_only[g];
  }
  j["failed_gate"] = std::move(failed);
  j["failed_only_gate"] = std::move(only);
  return j;
}

ojson verdict_to_json(const FilterVerdict& v) {
  ojson j;
  j["image_id"] = v.image_id;
  j["accepted"] = v.accepted;
  j["min_confidence"] = v.min_confidence;
  j["max_drift"] = v.max_drift;
  j["predicted_category"] = v.predicted_category;
  j["target_category"] = v.target_category;
  j["gates"] = {{"confidence", v.passed[0]}, {"spatial", v.passed[1]}, {"category", v.passed[2]}};
  return j;
}

}  // namespace posesynth
