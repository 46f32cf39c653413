#include "posesynth/features.hpp"

#include <cmath>
#include <limits>

#include "posesynth/errors.hpp"
#include "posesynth/geometry.hpp"

namespace posesynth {
namespace {

const Keypoint& need(const Keypoints2D& kps, Kp k) {
  const Keypoint& p = kps[idx(k)];
  if (!p.visible()) throw FeatureError("missing keypoint '" + std::string(kKeypointNames[idx(k)]) + "'");
  return p;
}

}  // namespace

std::array<Keypoint, kUpperBodyPoints> select_upper_body(const Keypoints2D& kps) {
  std::array<Keypoint, kUpperBodyPoints> out;
  for (std::size_t i = 0; i < kUpperBodyPoints; ++i) out[i] = kps[idx(kUpperBody[i])];
  return out;
}

GeometricQuantities geometric_quantities(const Keypoints2D& kps) {
  const Keypoint& ls = need(kps, Kp::kLeftShoulder);
  const Keypoint& rs = need(kps, Kp::kRightShoulder);
  const Keypoint& lh = need(kps, Kp::kLeftHip);
  const Keypoint& rh = need(kps, Kp::kRightHip);
  const Keypoint& nose = need(kps, Kp::kNose);
  const Keypoint& le = kps[idx(Kp::kLeftEye)];
  const Keypoint& re = kps[idx(Kp::kRightEye)];
  if (!le.visible() && !re.visible()) throw FeatureError("missing keypoint 'left_eye' and 'right_eye'");

  const double dx = ls.x - rs.x, dy = ls.y - rs.y;
  const double width = std::hypot(dx, dy);
  if (!(width > 0.0)) throw FeatureError("zero shoulder width");

  const double smx = 0.5 * (ls.x + rs.x), smy = 0.5 * (ls.y + rs.y);
  const double hmx = 0.5 * (lh.x + rh.x), hmy = 0.5 * (lh.y + rh.y);
  double eye_y = 0.0;
  if (le.visible() && re.visible())
    eye_y = 0.5 * (le.y + re.y);
  else
    eye_y = le.visible() ? le.y : re.y;

  GeometricQuantities q;
  q.alpha_spine = rad2deg(std::atan2(smx - hmx, -(smy - hmy)));
  const double px = dy, py = -dx;  // upward normal of the shoulder line
  const double ux = nose.x - smx, uy = nose.y - smy;
  q.alpha_head = rad2deg(std::atan2(px * uy - py * ux, px * ux + py * uy));
  q.r_shoulder = dy / width;
  q.h_eye = (smy - eye_y) / width;
  q.d_lateral = (smx - hmx) / width;
  return q;
}

FeatureVector raw_features(const Keypoints2D& kps) {
  const GeometricQuantities q = geometric_quantities(kps);
  FeatureVector f{};
  const auto upper = select_upper_body(kps);
  for (std::size_t i = 0; i < kUpperBodyPoints; ++i)
    f[i] = upper[i].visible() ? upper[i].y : std::numeric_limits<double>::quiet_NaN();
  f[13] = q.alpha_spine;
  f[14] = q.alpha_head;
  f[15] = q.r_shoulder;
  f[16] = q.h_eye;
  f[17] = q.d_lateral;
  return f;
}

NormalizationStats fit_normalizer(const std::vector<FeatureVector>& raw, std::string fitted_on) {
  if (raw.size() < 2) throw FeatureError("normalizer needs at least 2 samples");
  NormalizationStats s;
  s.fitted_on = std::move(fitted_on);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : raw)
      if (std::isfinite(f[j])) {
        sum += f[j];
        ++n;
      }
    if (n < 2) throw FeatureError("feature " + std::to_string(j) + " has fewer than 2 observed values");
    const double mean = sum / double(n);
    double ss = 0.0;
    for (const auto& f : raw)
      if (std::isfinite(f[j])) ss += (f[j] - mean) * (f[j] - mean);
    const double sd = std::sqrt(ss / double(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw FeatureError("feature " + std::to_string(j) + " is constant over the fit set");
    s.mean[j] = mean;
    s.stddev[j] = sd;
  }
  return s;
}

FeatureVector normalize(const FeatureVector& raw, const NormalizationStats& stats) {
  FeatureVector z{};
  for (std::size_t j = 0; j < kNumFeatures; ++j)
    z[j] = std::isfinite(raw[j]) ? (raw[j] - stats.mean[j]) / stats.stddev[j] : 0.0;
  return z;
}

FeatureVector extract(const Keypoints2D& kps, const NormalizationStats& stats) {
  return normalize(raw_features(kps), stats);
}

ojson stats_to_json(const NormalizationStats& stats) {
  ojson j;
  j["fitted_on"] = stats.fitted_on;
  j["mean"] = stats.mean;
  j["stddev"] = stats.stddev;
  return j;
}

NormalizationStats stats_from_json(const nlohmann::json& doc) {
  NormalizationStats s;
  try {
    s.fitted_on = doc.at("fitted_on").get<std::string>();
    const auto& m = doc.at("mean");
    const auto& d = doc.at("stddev");
    if (m.size() != kNumFeatures || d.size() != kNumFeatures) throw FeatureError("stats must hold 18 entries");
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      s.mean[j] = m[j].get<double>();
      s.stddev[j] = d[j].get<double>();
      if (!(s.stddev[j] > 0.0)) throw FeatureError("stats stddev must be positive");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FeatureError(std::string("bad normalization stats: ") + e.what());
  }
  return s;
}

}  // namespace posesynth
