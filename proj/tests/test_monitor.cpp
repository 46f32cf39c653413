#include <doctest.h>

#include <cmath>

#include "posesynth/category_rules.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/monitor.hpp"
#include "posesynth/random.hpp"

using namespace posesynth;

namespace {

// Frames carry their category in the nose x coordinate.
std::vector<Keypoints2D> stream(const std::vector<int>& cats) {
  std::vector<Keypoints2D> out(cats.size());
  for (std::size_t i = 0; i < cats.size(); ++i) out[i][0].x = cats[i];
  return out;
}

int by_label(const Keypoints2D& k) { return int(k[0].x); }

std::vector<int> repeat(std::vector<int> v, int cat, int n) {
  v.insert(v.end(), std::size_t(n), cat);
  return v;
}

}  // namespace

TEST_CASE("monitor config validation") {
  CHECK_NOTHROW(MonitorConfig{}.validate());
  CHECK_THROWS_AS((MonitorConfig{0, 0.1}.validate()), ConfigError);
  CHECK_THROWS_AS((MonitorConfig{15, 0.0}.validate()), ConfigError);
}

TEST_CASE("correct posture never alerts") {
  CHECK(run_monitor(stream(std::vector<int>(100, 0)), by_label, MonitorConfig{}).empty());
}

TEST_CASE("deviation from frame 10 triggers at frame 25") {
  const MonitorConfig cfg{15, 1.0 / 22.0};
  const auto alerts = run_monitor(stream(repeat(std::vector<int>(10, 0), 3, 40)), by_label, cfg);
  REQUIRE(alerts.size() == 1);
  CHECK(alerts[0].category == 3);
  CHECK(alerts[0].frame == 24);
  CHECK(alerts[0].trigger_s == 25.0 / 22.0);
  CHECK(std::abs((alerts[0].trigger_s - alerts[0].onset_s) - 15.0 / 22.0) < 1e-12);
}

TEST_CASE("latency equals N frame periods for clean deviations") {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const MonitorConfig cfg{1 + int(rng.below(40)), rng.uniform(0.01, 0.5)};
    const int lead = int(rng.below(50));
    const int cat = 1 + int(rng.below(9));
    const auto alerts = run_monitor(stream(repeat(std::vector<int>(std::size_t(lead), 0), cat, cfg.debounce_frames + 5)),
                                    by_label, cfg);
    REQUIRE(alerts.size() == 1);
    const Episode e{cat, lead, {}};
    const auto ev = score_episode(e, alerts, cfg);
    REQUIRE(ev.trigger_s);
    CHECK(std::abs((*ev.trigger_s - ev.onset_s) - cfg.debounce_frames * cfg.frame_period_s) < 1e-9);
  }
}

TEST_CASE("sub-debounce deviations do not alert") {
  std::vector<int> cats(5, 0);
  cats = repeat(cats, 2, 14);
  cats = repeat(cats, 0, 3);
  cats = repeat(cats, 5, 14);
  cats = repeat(cats, 6, 14);
  cats = repeat(cats, 0, 5);
  CHECK(run_monitor(stream(cats), by_label, MonitorConfig{}).empty());
}

TEST_CASE("undeterminable frames break the run") {
  auto cats = repeat({}, 4, 10);
  cats.push_back(kUndeterminable);
  cats = repeat(cats, 4, 14);
  CHECK(run_monitor(stream(cats), by_label, MonitorConfig{}).empty());
  cats.push_back(4);
  CHECK(run_monitor(stream(cats), by_label, MonitorConfig{}).size() == 1);
}

TEST_CASE("alert re-arms only after correct posture") {
  auto cats = repeat({}, 1, 40);
  cats = repeat(cats, 2, 40);  // still alerted
  CHECK(run_monitor(stream(cats), by_label, MonitorConfig{}).size() == 1);
  cats = repeat(cats, 0, 1);
  cats = repeat(cats, 2, 15);
  const auto alerts = run_monitor(stream(cats), by_label, MonitorConfig{});
  REQUIRE(alerts.size() == 2);
  CHECK(alerts[1].category == 2);

  AlertStateMachine sm(MonitorConfig{3, 1.0});
  sm.feed(7);
  CHECK(sm.state() == AlertStateMachine::State::kCandidate);
  CHECK(sm.count() == 1);
  sm.feed(7);
  CHECK(sm.feed(7).has_value());
  CHECK(sm.state() == AlertStateMachine::State::kAlerted);
  sm.feed(0);
  CHECK(sm.state() == AlertStateMachine::State::kIdle);
}

TEST_CASE("episode scoring") {
  const MonitorConfig cfg{15, 0.5};
  const Episode e{3, 20, {}};
  CHECK_FALSE(score_episode(e, {}, cfg).trigger_s);
  const std::vector<Alert> wrong = {{5, 40, 12.5, 20.5}};
  CHECK_FALSE(score_episode(e, wrong, cfg).trigger_s);
  const std::vector<Alert> early = {{3, 10, 0.0, 5.5}, {3, 40, 12.5, 20.5}};
  const auto ev = score_episode(e, early, cfg);
  CHECK(ev.onset_s == 10.0);
  CHECK(*ev.trigger_s == 20.5);
}
