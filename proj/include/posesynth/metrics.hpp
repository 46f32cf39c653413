#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "posesynth/coco.hpp"
#include "posesynth/io.hpp"
#include "posesynth/keypoints.hpp"

namespace posesynth {

struct OksParams {
  // COCO keypoint protocol: kappa_j = 2 sigma_j with the published per-keypoint sigmas.
  std::array<double, kNumKeypoints> kappa = {0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144,
                                             0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178};
  std::vector<double> thresholds = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};

  void validate() const;
};

// Mean over gt-visible keypoints of exp(-d^2 / (2 area kappa^2)); prediction
// visibility flags are ignored. Throws AnnotationError if gt has no visible point.
double oks(const Keypoints2D& pred, const Keypoints2D& gt, double area, const OksParams& p = {});

// Single-person AP: at each threshold, the fraction of ground-truth instances
// whose detection reaches that OKS (a missing detection never does); averaged
// over the threshold grid.
double average_precision(const std::map<long, Keypoints2D>& detections, const std::vector<AnnotationRecord>& gts,
                         const OksParams& p = {});

// 2 |nose - ear midpoint|; nullopt when the nose or either ear is not visible.
std::optional<double> head_length(const Keypoints2D& gt);

// Fraction of gt-visible keypoints with |pred - gt| <= alpha * head_len.
double pck(const Keypoints2D& pred, const Keypoints2D& gt, double head_len, double alpha = 0.2);

struct PckSummary {
  long correct = 0;
  long total = 0;           // gt-visible keypoints over the scored images
  long skipped_images = 0;  // no head segment, or no detection
  double value() const { return total ? double(correct) / double(total) : 0.0; }
};

PckSummary pck_dataset(const std::map<long, Keypoints2D>& detections, const std::vector<AnnotationRecord>& gts,
                       double alpha = 0.2);

struct ClassificationReport {
  int num_classes = kNumCategories;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  std::vector<long> support;
  std::vector<double> precision, recall, f1;
  std::vector<bool> absent;  // class never appears in the labels; its F1 counts as 0
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

ClassificationReport classification_report(const std::vector<int>& predicted, const std::vector<int>& labels,
                                           int num_classes = kNumCategories);

struct AlertEvent {
  int category = 0;
  double onset_s = 0.0;
  std::optional<double> trigger_s;
};

inline constexpr double kRecognitionWindowS = 30.0;

struct RecognitionStats {
  long events = 0;
  long detected = 0;            // triggered no later than onset + 30 s
  double rate = 0.0;
  std::optional<double> mean_latency_s;  // over detected events only
};

RecognitionStats recognition_stats(const std::vector<AlertEvent>& events);
std::map<int, RecognitionStats> recognition_by_category(const std::vector<AlertEvent>& events);

ojson report_to_json(const ClassificationReport& r);
ojson recognition_to_json(const RecognitionStats& s);

}  // namespace posesynth
