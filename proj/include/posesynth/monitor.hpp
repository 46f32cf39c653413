#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "posesynth/features.hpp"
#include "posesynth/metrics.hpp"
#include "posesynth/mlp.hpp"

namespace posesynth {

struct MonitorConfig {
  int debounce_frames = 15;
  double frame_period_s = 1.0 / 22.0;  // simulation parameter; there is no pose network here

  void validate() const;
};

struct Alert {
  int category = 0;
  long frame = 0;        // frame that completed the debounce run
  double onset_s = 0.0;  // start of the first frame of the run
  double trigger_s = 0.0;  // end of `frame`
};

// Frame k spans [k T, (k + 1) T). An alert fires at the end of the N-th
// consecutive frame with the same non-correct category. After an alert the
// machine stays silent until a correct frame re-arms it. An undeterminable
// frame (kUndeterminable) breaks the current run.
class AlertStateMachine {
 public:
  enum class State { kIdle, kCandidate, kAlerted };

  explicit AlertStateMachine(MonitorConfig cfg);

  std::optional<Alert> feed(int category);

  State state() const { return state_; }
  int candidate() const { return candidate_; }
  int count() const { return count_; }
  long frames_seen() const { return frame_; }

 private:
  MonitorConfig cfg_;
  State state_ = State::kIdle;
  int candidate_ = 0;
  int count_ = 0;
  long run_start_ = 0;
  long frame_ = 0;
};

using FrameClassifier = std::function<int(const Keypoints2D&)>;

// Feature extraction failures classify as kUndeterminable.
FrameClassifier mlp_frame_classifier(const MlpModel& model, const NormalizationStats& stats);
FrameClassifier quantized_frame_classifier(const QuantizedModel& model, const NormalizationStats& stats);

std::vector<Alert> run_monitor(const std::vector<Keypoints2D>& frames, const FrameClassifier& classify,
                               const MonitorConfig& cfg);

// One simulated episode: correct posture, then a deviation from `onset_frame`.
struct Episode {
  int category = 0;
  long onset_frame = 0;
  std::vector<Keypoints2D> frames;
};

// Pairs the episode's ground-truth onset with the first alert of the episode's
// category at or after it.
AlertEvent score_episode(const Episode& e, const std::vector<Alert>& alerts, const MonitorConfig& cfg);

ojson alert_to_json(const Alert& a);

}  // namespace posesynth
