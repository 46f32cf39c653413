#include "posesynth/metrics.hpp"

#include <cmath>

#include "posesynth/errors.hpp"

namespace posesynth {

void OksParams::validate() const {
  for (double k : kappa)
    if (!(k > 0.0)) throw ConfigError("OKS kappa constants must be positive");
  if (thresholds.empty()) throw ConfigError("OKS threshold grid is empty");
  for (double t : thresholds)
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("OKS thresholds must lie in (0, 1]");
}

double oks(const Keypoints2D& pred, const Keypoints2D& gt, double area, const OksParams& p) {
  if (!(area > 0.0)) throw AnnotationError("OKS needs a positive object area");
  double sum = 0.0;
  int n = 0;
  for (std::size_t j = 0; j < kNumKeypoints; ++j) {
    if (!gt[j].visible()) continue;
    const double dx = pred[j].x - gt[j].x, dy = pred[j].y - gt[j].y;
    sum += std::exp(-(dx * dx + dy * dy) / (2.0 * area * p.kappa[j] * p.kappa[j]));
    ++n;
  }
  if (n == 0) throw AnnotationError("OKS needs at least one visible ground-truth keypoint");
  return sum / n;
}

double average_precision(const std::map<long, Keypoints2D>& detections, const std::vector<AnnotationRecord>& gts,
                         const OksParams& p) {
  p.validate();
  if (gts.empty()) return 0.0;
  std::vector<double> scores;
  scores.reserve(gts.size());
  for (const auto& g : gts) {
    const auto it = detections.find(g.image_id);
    scores.push_back(it == detections.end() ? -1.0 : oks(it->second, g.keypoints, g.bbox.area(), p));
  }
  double ap = 0.0;
  for (double t : p.thresholds) {
    long hits = 0;
    for (double s : scores) hits += s >= t;
    ap += double(hits) / double(gts.size());
  }
  return ap / double(p.thresholds.size());
}

std::optional<double> head_length(const Keypoints2D& gt) {
  const auto& n = gt[idx(Kp::kNose)];
  const auto& l = gt[idx(Kp::kLeftEar)];
  const auto& r = gt[idx(Kp::kRightEar)];
  if (!n.visible() || !l.visible() || !r.visible()) return std::nullopt;
  const double len = 2.0 * std::hypot(n.x - (l.x + r.x) / 2.0, n.y - (l.y + r.y) / 2.0);
  if (!(len > 0.0)) return std::nullopt;
  return len;
}

namespace {

std::pair<long, long> pck_counts(const Keypoints2D& pred, const Keypoints2D& gt, double head_len, double alpha) {
  long correct = 0, total = 0;
  for (std::size_t j = 0; j < kNumKeypoints; ++j) {
    if (!gt[j].visible()) continue;
    ++total;
    correct += std::hypot(pred[j].x - gt[j].x, pred[j].y - gt[j].y) <= alpha * head_len;
  }
  return {correct, total};
}

double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }

}  // namespace

double pck(const Keypoints2D& pred, const Keypoints2D& gt, double head_len, double alpha) {
  if (!(head_len > 0.0)) throw AnnotationError("PCK needs a positive head length");
  const auto [c, t] = pck_counts(pred, gt, head_len, alpha);
  return t ? double(c) / double(t) : 0.0;
}

PckSummary pck_dataset(const std::map<long, Keypoints2D>& detections, const std::vector<AnnotationRecord>& gts,
                       double alpha) {
  PckSummary s;
  for (const auto& g : gts) {
    const auto it = detections.find(g.image_id);
    const auto h = head_length(g.keypoints);
    if (it == detections.end() || !h) {
      ++s.skipped_images;
      continue;
    }
    const auto [c, t] = pck_counts(it->second, g.keypoints, *h, alpha);
    s.correct += c;
    s.total += t;
  }
  return s;
}

ClassificationReport classification_report(const std::vector<int>& predicted, const std::vector<int>& labels,
                                           int num_classes) {
  if (labels.empty()) throw Error("classification report needs at least one sample");
  if (predicted.size() != labels.size()) throw Error("prediction and label counts differ");
  ClassificationReport r;
  r.num_classes = num_classes;
  const std::size_t k = std::size_t(num_classes);
  r.confusion.assign(k, std::vector<long>(k, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes)
      throw Error("class id outside [0, " + std::to_string(num_classes - 1) + "] at sample " + std::to_string(i));
    ++r.confusion[std::size_t(labels[i])][std::size_t(predicted[i])];
  }
  r.support.assign(k, 0);
  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.f1.assign(k, 0.0);
  r.absent.assign(k, false);
  long correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    long col = 0;
    for (std::size_t t = 0; t < k; ++t) {
      r.support[c] += r.confusion[c][t];
      col += r.confusion[t][c];
    }
    const double tp = double(r.confusion[c][c]);
    correct += r.confusion[c][c];
    r.absent[c] = r.support[c] == 0;
    r.precision[c] = safe_div(tp, double(col));
    r.recall[c] = safe_div(tp, double(r.support[c]));
    r.f1[c] = r.absent[c] ? 0.0 : safe_div(2.0 * r.precision[c] * r.recall[c], r.precision[c] + r.recall[c]);
    r.macro_f1 += r.f1[c];
  }
  r.macro_f1 /= double(k);
  r.accuracy = double(correct) / double(labels.size());
  return r;
}

RecognitionStats recognition_stats(const std::vector<AlertEvent>& events) {
  RecognitionStats s;
  double latency = 0.0;
  for (const auto& e : events) {
    ++s.events;
    if (!e.trigger_s) continue;
    const double dt = *e.trigger_s - e.onset_s;
    if (dt < 0.0 || dt > kRecognitionWindowS) continue;
    ++s.detected;
    latency += dt;
  }
  s.rate = safe_div(double(s.detected), double(s.events));
  if (s.detected) s.mean_latency_s = latency / double(s.detected);
  return s;
}

std::map<int, RecognitionStats> recognition_by_category(const std::vector<AlertEvent>& events) {
  std::map<int, std::vector<AlertEvent>> by;
  for (const auto& e : events) by[e.category].push_back(e);
  std::map<int, RecognitionStats> out;
  for (const auto& [c, ev] : by) out[c] = recognition_stats(ev);
  return out;
}

ojson report_to_json(const ClassificationReport& r) {
  ojson j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  ojson classes = ojson::array();
  for (std::size_t c = 0; c < std::size_t(r.num_classes); ++c) {
    ojson e{{"id", c}};
    if (r.num_classes == kNumCategories) e["name"] = kCategoryNames[c];
    e["support"] = r.support[c];
    e["precision"] = r.precision[c];
    e["recall"] = r.recall[c];
    e["f1"] = r.f1[c];
    e["absent"] = bool(r.absent[c]);
    classes.push_back(e);
  }
  j["classes"] = classes;
  j["confusion"] = r.confusion;
  return j;
}

ojson recognition_to_json(const RecognitionStats& s) {
  ojson j{{"events", s.events}, {"detected", s.detected}, {"recognition_rate", s.rate}};
  j["mean_latency_s"] = s.mean_latency_s ? ojson(*s.mean_latency_s) : ojson(nullptr);
  return j;
}

}  // namespace posesynth
