#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "posesynth/io.hpp"
#include "posesynth/keypoints.hpp"

namespace posesynth {

// Tight rectangle over the visible keypoints; w and h are at least 1 px.
// Throws AnnotationError with fewer than two visible keypoints.
BBox bbox_from_keypoints(const Keypoints2D& kps);

struct Provenance {
  int template_id = 0;
  std::uint64_t seed = 0;
  std::string prompt_id;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ImageRecord {
  long id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  Provenance provenance;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct AnnotationRecord {
  long id = 0;
  long image_id = 0;
  int category_id = 0;
  Keypoints2D keypoints{};
  BBox bbox;
  int num_keypoints = 0;
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// Rounds keypoints to the on-disk precision and derives bbox and count, so
// the record survives a write/read cycle unchanged.
AnnotationRecord make_annotation(long id, long image_id, int category_id, Keypoints2D kps);

struct DatasetManifest {
  std::string split = "all";  // all | train | val | test
  std::string config_hash;
  std::vector<ImageRecord> images;
  std::vector<AnnotationRecord> annotations;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

  const ImageRecord* find_image(long id) const;
  const AnnotationRecord* annotation_for(long image_id) const;
};

// Throws ManifestError on duplicate ids, dangling image references and
// out-of-range values.
void validate(const DatasetManifest& m);

// Sorts images and annotations by id.
void canonicalize(DatasetManifest& m);

ojson to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& doc);

std::string serialize_coco(const DatasetManifest& m);
DatasetManifest parse_coco(const std::string& text);

void write_coco(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_coco(const std::filesystem::path& path);

// Per class, the validation split takes floor(n * val_ratio) samples chosen by
// a seeded shuffle and the training split keeps the remainder.
std::pair<DatasetManifest, DatasetManifest> stratified_split(const DatasetManifest& m,
                                                             double train_ratio, double val_ratio,
                                                             std::uint64_t seed);

// Subset of m holding the given image ids (and their annotations).
DatasetManifest subset(const DatasetManifest& m, const std::vector<long>& image_ids,
                       std::string split);

}  // namespace posesynth
