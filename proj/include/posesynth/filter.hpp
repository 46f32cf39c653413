#pragma once

#include <array>
#include <map>
#include <vector>

#include "posesynth/category_rules.hpp"
#include "posesynth/coco.hpp"
#include "posesynth/generation.hpp"

namespace posesynth {

struct FilterThresholds {
  double conf = 0.5;
  double drift = 0.15;

  void validate() const;  // conf in (0, 1), drift > 0
};

enum Gate { kConfidenceGate = 0, kSpatialGate = 1, kCategoryGate = 2 };
inline constexpr std::array<const char*, 3> kGateNames = {"confidence", "spatial", "category"};

struct FilterVerdict {
  long image_id = 0;
  bool accepted = false;
  double min_confidence = 0.0;
  double max_drift = 0.0;  // max over gt-visible keypoints of |est - gt| / bbox diagonal
  int predicted_category = kUndeterminable;
  int target_category = 0;
  std::array<bool, 3> passed{};
};

// All three measurements are always taken, whichever gate fails. Strict
// inequalities: min confidence > conf, max drift < drift, categories equal.
FilterVerdict evaluate_gates(const ReestimateResult& est, const AnnotationRecord& gt, const FilterThresholds& t,
                             const CategoryRules& rules = default_category_rules());

// Within 10% of either threshold; worth a human look.
bool is_borderline(const FilterVerdict& v, const FilterThresholds& t);

struct GateStats {
  long total = 0;
  long accepted = 0;
  long rejected = 0;
  std::array<long, 3> failed{};       // items failing each gate (an item may fail several)
  std::array<long, 3> failed_only{};  // items failing exactly that gate and no other
  double rejection_rate() const { return total ? double(rejected) / double(total) : 0.0; }
};

struct FilterOutcome {
  DatasetManifest accepted;
  DatasetManifest rejected;
  GateStats stats;
  std::vector<FilterVerdict> verdicts;  // ascending image id
};

// Partitions `gts` by verdict. Every annotated image needs exactly one
// re-estimate and vice versa; otherwise FilterError lists the orphan ids.
FilterOutcome filter_dataset(const std::map<long, ReestimateResult>& results, const DatasetManifest& gts,
                             const FilterThresholds& t, const CategoryRules& rules = default_category_rules());

ojson stats_to_json(const GateStats& s);
ojson verdict_to_json(const FilterVerdict& v);

}  // namespace posesynth
