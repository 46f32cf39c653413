#pragma once

#include <cstdint>

#include "posesynth/io.hpp"
#include "posesynth/keypoints.hpp"
#include "posesynth/raster.hpp"

namespace posesynth {

// Pixel centers sit at integer coordinates; keypoints share that frame.

struct AugmentSpec {
  double scale_min = 0.5, scale_max = 1.0;   // resolution jitter factor r
  double crop_min = 0.8, crop_max = 1.0;     // crop window side as a fraction of the canvas
  double rotation_deg = 5.0;                 // phi drawn from [-rotation_deg, rotation_deg]

  void validate() const;  // ranges ordered and inside [0.5, 1], [0.8, 1], [0, 5]
};

struct CropWindow {
  double x = 0.0, y = 0.0;  // top-left in source pixels
  double scale = 1.0;
  bool clamped = false;     // requested window stuck out of the canvas and was shifted back
};

struct AugmentParams {
  double resolution = 1.0;
  CropWindow crop;
  double rotation_deg = 0.0;
};

struct Augmented {
  RasterImage image;
  Keypoints2D keypoints{};
};

// Bilinear down to round(r * size), then bilinear back up. Keypoints are untouched.
RasterImage resolution_jitter(const RasterImage& img, double r);

// Clamps the window into the canvas.
CropWindow make_crop_window(double x, double y, double scale, int width, int height);

// Resamples the window back to the full canvas: source x = window.x + u * scale.
// Keypoints map to (x - window.x) / scale; points leaving the canvas get v = 0.
Augmented random_crop(const RasterImage& img, const Keypoints2D& kps, const CropWindow& window);
Keypoints2D crop_keypoints(const Keypoints2D& kps, const CropWindow& window, int width, int height);

// Counter-clockwise on screen for phi > 0, about ((w-1)/2, (h-1)/2); uncovered
// pixels are black and keypoints leaving the canvas get v = 0.
Augmented micro_rotate(const RasterImage& img, const Keypoints2D& kps, double phi_deg);
Keypoints2D rotate_keypoints(const Keypoints2D& kps, double phi_deg, int width, int height);

AugmentParams sample_augment_params(const AugmentSpec& spec, int width, int height, std::uint64_t seed);

// Crop, then rotation, then resolution jitter.
Augmented apply_augment(const RasterImage& img, const Keypoints2D& kps, const AugmentParams& p);
Keypoints2D augment_keypoints(const Keypoints2D& kps, const AugmentParams& p, int width, int height);

ojson params_to_json(const AugmentParams& p);

}  // namespace posesynth
