#include "posesynth/monitor.hpp"

#include "posesynth/category_rules.hpp"
#include "posesynth/errors.hpp"

namespace posesynth {

void MonitorConfig::validate() const {
  if (debounce_frames < 1) throw ConfigError("debounce must be at least one frame");
  if (!(frame_period_s > 0.0)) throw ConfigError("frame period must be positive");
}

AlertStateMachine::AlertStateMachine(MonitorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::optional<Alert> AlertStateMachine::feed(int category) {
  const long k = frame_++;
  if (category == 0) {
    state_ = State::kIdle;
    count_ = 0;
    return std::nullopt;
  }
  if (state_ == State::kAlerted) return std::nullopt;
  if (category == kUndeterminable) {
    state_ = State::kIdle;
    count_ = 0;
    return std::nullopt;
  }
  if (state_ == State::kCandidate && category == candidate_) {
    ++count_;
  } else {
    state_ = State::kCandidate;
    candidate_ = category;
    count_ = 1;
    run_start_ = k;
  }
  if (count_ < cfg_.debounce_frames) return std::nullopt;
  state_ = State::kAlerted;
  const double t = cfg_.frame_period_s;
  return Alert{candidate_, k, double(run_start_) * t, double(k + 1) * t};
}

FrameClassifier mlp_frame_classifier(const MlpModel& model, const NormalizationStats& stats) {
  return [model, stats](const Keypoints2D& kps) {
    try {
      return predict(model, extract(kps, stats)).category;
    } catch (const FeatureError&) {
      return kUndeterminable;
    }
  };
}

FrameClassifier quantized_frame_classifier(const QuantizedModel& model, const NormalizationStats& stats) {
  return [model, stats](const Keypoints2D& kps) {
    try {
      return predict(model, extract(kps, stats)).category;
    } catch (const FeatureError&) {
      return kUndeterminable;
    }
  };
}

std::vector<Alert> run_monitor(const std::vector<Keypoints2D>& frames, const FrameClassifier& classify,
                               const MonitorConfig& cfg) {
  AlertStateMachine sm(cfg);
  std::vector<Alert> alerts;
  for (const auto& f : frames)
    if (auto a = sm.feed(classify(f))) alerts.push_back(*a);
  return alerts;
}

AlertEvent score_episode(const Episode& e, const std::vector<Alert>& alerts, const MonitorConfig& cfg) {
  AlertEvent ev{e.category, double(e.onset_frame) * cfg.frame_period_s, std::nullopt};
  for (const auto& a : alerts)
    if (a.category == e.category && a.frame >= e.onset_frame) {
      ev.trigger_s = a.trigger_s;
      break;
    }
  return ev;
}

ojson alert_to_json(const Alert& a) {
  return ojson{{"category", a.category},
               {"frame", a.frame},
               {"onset_s", a.onset_s},
               {"trigger_s", a.trigger_s}};
}

}  // namespace posesynth
