#include "posesynth/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace posesynth {
namespace {

using i64 = std::int64_t;
using i128 = __int128;

constexpr i64 kSub = 16;  // sub-pixel steps per pixel
constexpr i64 kCoordLimit = i64(1) << 30;

i64 to_fixed(double v) {
  const double s = std::nearbyint(v * double(kSub));
  return static_cast<i64>(std::clamp(s, double(-kCoordLimit), double(kCoordLimit)));
}

i64 floor_div(i64 a, i64 b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }
i64 ceil_div(i64 a, i64 b) { return -floor_div(-a, b); }

struct Fixed {
  i64 x, y;
};

void fill_limb(RasterImage& img, Fixed a, Fixed b, i64 thickness, const Rgb& color) {
  const i64 dx = b.x - a.x, dy = b.y - a.y;
  const i128 len2 = i128(dx) * dx + i128(dy) * dy;
  if (len2 == 0) return;
  const i64 half = (thickness + 1) / 2;
  const i64 x0 = std::max<i64>(0, ceil_div(std::min(a.x, b.x) - half, kSub));
  const i64 x1 = std::min<i64>(img.width - 1, floor_div(std::max(a.x, b.x) + half, kSub));
  const i64 y0 = std::max<i64>(0, ceil_div(std::min(a.y, b.y) - half, kSub));
  const i64 y1 = std::min<i64>(img.height - 1, floor_div(std::max(a.y, b.y) + half, kSub));
  const i128 band = i128(thickness) * thickness * len2;
  for (i64 py = y0; py <= y1; ++py)
    for (i64 px = x0; px <= x1; ++px) {
      const i64 wx = px * kSub - a.x, wy = py * kSub - a.y;
      const i128 along = i128(wx) * dx + i128(wy) * dy;
      if (along < 0 || along > len2) continue;
      const i128 cross = i128(wx) * dy - i128(wy) * dx;
      // |cross| / |d| is the distance to the limb axis; compare squared, times 4.
      if (4 * cross * cross <= band) img.set(int(px), int(py), color);
    }
}

void fill_circle(RasterImage& img, Fixed c, i64 radius, const Rgb& color) {
  const i64 x0 = std::max<i64>(0, ceil_div(c.x - radius, kSub));
  const i64 x1 = std::min<i64>(img.width - 1, floor_div(c.x + radius, kSub));
  const i64 y0 = std::max<i64>(0, ceil_div(c.y - radius, kSub));
  const i64 y1 = std::min<i64>(img.height - 1, floor_div(c.y + radius, kSub));
  const i128 r2 = i128(radius) * radius;
  for (i64 py = y0; py <= y1; ++py)
    for (i64 px = x0; px <= x1; ++px) {
      const i64 ex = px * kSub - c.x, ey = py * kSub - c.y;
      if (i128(ex) * ex + i128(ey) * ey <= r2) img.set(int(px), int(py), color);
    }
}

// Nearest positive ray parameter for a unit direction from the origin, or -1.
double intersect_capsule(const Vec3& rd, const Capsule& cap) {
  const Vec3 oa = cap.a * -1.0;
  const Vec3 ba = cap.b - cap.a;
  const double r2 = cap.radius * cap.radius;
  const double baba = ba.dot(ba);
  auto sphere = [&](const Vec3& oc) {
    const double b = rd.dot(oc);
    const double h = b * b - (oc.dot(oc) - r2);
    return h >= 0.0 ? -b - std::sqrt(h) : -1.0;
  };
  if (baba <= 1e-18) return sphere(oa);
  const double bard = ba.dot(rd);
  const double baoa = ba.dot(oa);
  const double rdoa = rd.dot(oa);
  const double oaoa = oa.dot(oa);
  const double a = baba - bard * bard;
  const double b = baba * rdoa - baoa * bard;
  const double c = baba * oaoa - baoa * baoa - r2 * baba;
  const double h = b * b - a * c;
  if (h < 0.0) return -1.0;
  if (a > 1e-12 * baba) {
    const double t = (-b - std::sqrt(h)) / a;
    const double y = baoa + t * bard;
    if (y > 0.0 && y < baba) return t;
    return sphere(y <= 0.0 ? oa : cap.b * -1.0);
  }
  // Ray parallel to the axis: only the near cap can be hit first.
  const double ta = sphere(oa), tb = sphere(cap.b * -1.0);
  if (ta < 0.0) return tb;
  if (tb < 0.0) return ta;
  return std::min(ta, tb);
}

}  // namespace

LimbSpec openpose_limb_spec(int width, int height) {
  // OpenPose body-18 palette and limb table (CMU OpenPose / ControlNet
  // annotator), converted from 1-based to 0-based point indices.
  static constexpr std::array<Rgb, kOpenPosePoints> kPalette = {{
      {255, 0, 0},   {255, 85, 0},  {255, 170, 0}, {255, 255, 0}, {170, 255, 0}, {85, 255, 0},
      {0, 255, 0},   {0, 255, 85},  {0, 255, 170}, {0, 255, 255}, {0, 170, 255}, {0, 85, 255},
      {0, 0, 255},   {85, 0, 255},  {170, 0, 255}, {255, 0, 255}, {255, 0, 170}, {255, 0, 85},
  }};
  static constexpr std::array<std::array<int, 2>, 17> kPairs = {{
      {1, 2}, {1, 5}, {2, 3}, {3, 4}, {5, 6}, {6, 7}, {1, 8}, {8, 9}, {9, 10},
      {1, 11}, {11, 12}, {12, 13}, {1, 0}, {0, 14}, {14, 16}, {0, 15}, {15, 17},
  }};
  LimbSpec spec;
  for (std::size_t i = 0; i < kPairs.size(); ++i) spec.limbs.push_back({kPairs[i][0], kPairs[i][1], kPalette[i]});
  spec.joint_colors = kPalette;
  const double scale = std::min(width, height) / 512.0;
  spec.limb_thickness_px = 4.0 * scale;
  spec.joint_radius_px = 4.0 * scale;
  return spec;
}

RasterImage render_openpose(const Keypoints2D& kps, int width, int height, const LimbSpec& spec) {
  RasterImage img(width, height);
  std::array<Fixed, kOpenPosePoints> pts{};
  std::array<bool, kOpenPosePoints> vis{};
  for (std::size_t i = 0; i < kOpenPosePoints; ++i) {
    const int c = kOpenPoseFromCoco[i];
    if (c >= 0) {
      vis[i] = kps[std::size_t(c)].visible();
      pts[i] = {to_fixed(kps[std::size_t(c)].x), to_fixed(kps[std::size_t(c)].y)};
    }
  }
  const Fixed ls = pts[5], rs = pts[2];
  vis[kOpenPoseNeck] = vis[5] && vis[2];
  // Midpoint in fixed point, rounded toward negative infinity on both axes.
  pts[kOpenPoseNeck] = {floor_div(ls.x + rs.x, 2), floor_div(ls.y + rs.y, 2)};

  const i64 thickness = to_fixed(spec.limb_thickness_px);
  const i64 radius = to_fixed(spec.joint_radius_px);
  for (const Limb& l : spec.limbs) {
    if (l.a < 0 || l.b < 0 || l.a >= int(kOpenPosePoints) || l.b >= int(kOpenPosePoints)) continue;
    if (!vis[std::size_t(l.a)] || !vis[std::size_t(l.b)]) continue;
    fill_limb(img, pts[std::size_t(l.a)], pts[std::size_t(l.b)], thickness, l.color);
  }
  for (std::size_t i = 0; i < kOpenPosePoints; ++i)
    if (vis[i]) fill_circle(img, pts[i], radius, spec.joint_colors[i]);
  return img;
}

std::vector<Capsule> body_capsules(const Skeleton3D& s, const GirthTable& g) {
  using J = Joint;
  std::vector<Capsule> caps = {
      {s[J::kPelvis], s[J::kChest], g.torso},
      {s[J::kChest], s[J::kHead], g.neck},
      {s[J::kChest], s[J::kLeftShoulder], g.shoulder_girdle},
      {s[J::kChest], s[J::kRightShoulder], g.shoulder_girdle},
      {s[J::kLeftShoulder], s[J::kLeftElbow], g.upper_arm},
      {s[J::kRightShoulder], s[J::kRightElbow], g.upper_arm},
      {s[J::kLeftElbow], s[J::kLeftWrist], g.forearm},
      {s[J::kRightElbow], s[J::kRightWrist], g.forearm},
      {s[J::kPelvis], s[J::kLeftHip], g.pelvis},
      {s[J::kPelvis], s[J::kRightHip], g.pelvis},
      {s[J::kLeftHip], s[J::kLeftKnee], g.thigh},
      {s[J::kRightHip], s[J::kRightKnee], g.thigh},
      {s[J::kLeftKnee], s[J::kLeftAnkle], g.shin},
      {s[J::kRightKnee], s[J::kRightAnkle], g.shin},
  };
  // Skull as a sphere between the ears, pushed a third of the way to the nose.
  const Vec3 ears = (s[J::kLeftEar] + s[J::kRightEar]) * 0.5;
  const Vec3 skull = ears + (s[J::kNose] - ears) * 0.3;
  caps.push_back({skull, skull, g.head});
  return caps;
}

DepthMap render_depth(const std::vector<Capsule>& capsules, const CameraModel& camera, int width, int height,
                      DepthRange range) {
  DepthMap depth(width, height, range.near_m, range.far_m);
  const double sx = double(width) / camera.width, sy = double(height) / camera.height;
  const double fx = camera.focal_px * sx, fy = camera.focal_px * sy;
  const double cx = (camera.cx + 0.5) * sx - 0.5, cy = (camera.cy + 0.5) * sy - 0.5;
  std::vector<double> zbuf(std::size_t(width) * height, std::numeric_limits<double>::infinity());

  for (const Capsule& cap : capsules) {
    // Conservative screen bounds from the two end spheres.
    double u0 = width, u1 = -1, v0 = height, v1 = -1;
    bool whole = false;
    for (const Vec3& c : {cap.a, cap.b}) {
      const double zn = c.z - cap.radius, zf = c.z + cap.radius;
      if (zn <= 1e-6) {
        whole = true;
        break;
      }
      const double xs[4] = {(c.x - cap.radius) / zn, (c.x - cap.radius) / zf, (c.x + cap.radius) / zn,
                            (c.x + cap.radius) / zf};
      const double ys[4] = {(c.y - cap.radius) / zn, (c.y - cap.radius) / zf, (c.y + cap.radius) / zn,
                            (c.y + cap.radius) / zf};
      u0 = std::min(u0, cx + fx * *std::min_element(xs, xs + 4));
      u1 = std::max(u1, cx + fx * *std::max_element(xs, xs + 4));
      v0 = std::min(v0, cy + fy * *std::min_element(ys, ys + 4));
      v1 = std::max(v1, cy + fy * *std::max_element(ys, ys + 4));
    }
    const int x0 = whole ? 0 : std::max(0, int(std::floor(u0)) - 1);
    const int x1 = whole ? width - 1 : std::min(width - 1, int(std::ceil(u1)) + 1);
    const int y0 = whole ? 0 : std::max(0, int(std::floor(v0)) - 1);
    const int y1 = whole ? height - 1 : std::min(height - 1, int(std::ceil(v1)) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const Vec3 d{(x - cx) / fx, (y - cy) / fy, 1.0};
        const double n = d.norm();
        const Vec3 rd = d * (1.0 / n);
        const double t = intersect_capsule(rd, cap);
        if (t <= 0.0) continue;
        double& z = zbuf[std::size_t(y) * width + x];
        z = std::min(z, t * rd.z);
      }
  }
  const double span = range.far_m - range.near_m;
  for (std::size_t i = 0; i < zbuf.size(); ++i) {
    if (!std::isfinite(zbuf[i])) continue;
    const double q = std::nearbyint((zbuf[i] - range.near_m) / span * 65535.0);
    depth.values[i] = std::uint16_t(std::clamp(q, 0.0, 65535.0));
  }
  return depth;
}

DepthMap render_depth(const Skeleton3D& skeleton, const CameraModel& camera, int width, int height,
                      DepthRange range, const GirthTable& girth) {
  return render_depth(body_capsules(skeleton, girth), camera, width, height, range);
}

}  // namespace posesynth
