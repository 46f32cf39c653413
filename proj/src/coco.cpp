#include "posesynth/coco.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "posesynth/errors.hpp"
#include "posesynth/random.hpp"

namespace posesynth {
namespace {

using nlohmann::json;
using Kind = ManifestError::Kind;

const json& field(const json& rec, const char* key, const char* section, long index) {
  auto it = rec.find(key);
  if (it == rec.end())
    throw ManifestError(Kind::kSchema, section, index, std::string("missing field '") + key + "'");
  return *it;
}

long get_long(const json& rec, const char* key, const char* section, long index) {
  const json& v = field(rec, key, section, index);
  if (!v.is_number_integer())
    throw ManifestError(Kind::kSchema, section, index, std::string("'") + key + "' must be an integer");
  return v.get<long>();
}

double get_number(const json& v, const char* key, const char* section, long index) {
  if (!v.is_number())
    throw ManifestError(Kind::kSchema, section, index, std::string("'") + key + "' must be numeric");
  return v.get<double>();
}

std::string get_string(const json& rec, const char* key, const char* section, long index) {
  const json& v = field(rec, key, section, index);
  if (!v.is_string())
    throw ManifestError(Kind::kSchema, section, index, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t parse_seed(const std::string& s, long index) {
  if (s.size() < 3 || s.size() > 18 || s.rfind("0x", 0) != 0)
    throw ManifestError(Kind::kSchema, "images", index, "provenance seed must be a 0x-prefixed hex string");
  std::uint64_t v = 0;
  for (std::size_t i = 2; i < s.size(); ++i) {
    const char c = s[i];
    int d = c >= '0' && c <= '9' ? c - '0' : c >= 'a' && c <= 'f' ? c - 'a' + 10 : -1;
    if (d < 0) throw ManifestError(Kind::kSchema, "images", index, "bad hex digit in provenance seed");
    v = v << 4 | static_cast<std::uint64_t>(d);
  }
  return v;
}

ojson image_json(const ImageRecord& im) {
  ojson j;
  j["id"] = im.id;
  j["file_name"] = im.file_name;
  j["width"] = im.width;
  j["height"] = im.height;
  j["provenance"] = {{"template_id", im.provenance.template_id},
                     {"seed", "0x" + hex64(im.provenance.seed)},
                     {"prompt_id", im.provenance.prompt_id}};
  return j;
}

ojson annotation_json(const AnnotationRecord& a) {
  ojson kp = ojson::array();
  for (const auto& k : a.keypoints) {
    kp.push_back(round2(k.x));
    kp.push_back(round2(k.y));
    kp.push_back(k.v);
  }
  ojson j;
  j["id"] = a.id;
  j["image_id"] = a.image_id;
  j["category_id"] = a.category_id;
  j["keypoints"] = std::move(kp);
  j["num_keypoints"] = a.num_keypoints;
  j["bbox"] = {round2(a.bbox.x), round2(a.bbox.y), round2(a.bbox.w), round2(a.bbox.h)};
  j["area"] = round2(round2(a.bbox.w) * round2(a.bbox.h));
  j["iscrowd"] = 0;
  return j;
}

ojson categories_json() {
  ojson cats = ojson::array();
  for (int c = 0; c < kNumCategories; ++c) {
    ojson kp = ojson::array();
    for (auto n : kKeypointNames) kp.push_back(std::string(n));
    ojson j;
    j["id"] = c;
    j["name"] = std::string(kCategoryNames[c]);
    j["supercategory"] = "posture";
    j["keypoints"] = std::move(kp);
    cats.push_back(std::move(j));
  }
  return cats;
}

}  // namespace

BBox bbox_from_keypoints(const Keypoints2D& kps) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  int n = 0;
  for (const auto& k : kps) {
    if (!k.visible()) continue;
    ++n;
    x0 = std::min(x0, k.x);
    y0 = std::min(y0, k.y);
    x1 = std::max(x1, k.x);
    y1 = std::max(y1, k.y);
  }
  if (n < 2) throw AnnotationError("bbox needs at least 2 visible keypoints, got " + std::to_string(n));
  return {x0, y0, std::max(1.0, x1 - x0), std::max(1.0, y1 - y0)};
}

AnnotationRecord make_annotation(long id, long image_id, int category_id, Keypoints2D kps) {
  for (auto& k : kps) {
    if (k.visible()) {
      k.x = round2(k.x);
      k.y = round2(k.y);
    } else {
      k = {0.0, 0.0, 0};
    }
  }
  AnnotationRecord a;
  a.id = id;
  a.image_id = image_id;
  a.category_id = category_id;
  a.keypoints = kps;
  const BBox b = bbox_from_keypoints(kps);
  a.bbox = {round2(b.x), round2(b.y), round2(b.w), round2(b.h)};
  a.num_keypoints = count_visible(kps);
  return a;
}

const ImageRecord* DatasetManifest::find_image(long id) const {
  for (const auto& im : images)
    if (im.id == id) return &im;
  return nullptr;
}

const AnnotationRecord* DatasetManifest::annotation_for(long image_id) const {
  for (const auto& a : annotations)
    if (a.image_id == image_id) return &a;
  return nullptr;
}

void validate(const DatasetManifest& m) {
  static const std::set<std::string> kSplits = {"all", "train", "val", "test"};
  if (!kSplits.count(m.split))
    throw ManifestError(Kind::kInvalidValue, "info", -1, "unknown split tag '" + m.split + "'");
  std::set<long> image_ids;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const auto& im = m.images[i];
    if (!image_ids.insert(im.id).second)
      throw ManifestError(Kind::kDuplicateId, "images", long(i), "image id " + std::to_string(im.id));
    if (im.width <= 0 || im.height <= 0)
      throw ManifestError(Kind::kInvalidValue, "images", long(i), "image size must be positive");
    if (im.file_name.empty())
      throw ManifestError(Kind::kInvalidValue, "images", long(i), "empty file_name");
  }
  std::set<long> ann_ids;
  for (std::size_t i = 0; i < m.annotations.size(); ++i) {
    const auto& a = m.annotations[i];
    const long li = long(i);
    if (!ann_ids.insert(a.id).second)
      throw ManifestError(Kind::kDuplicateId, "annotations", li, "annotation id " + std::to_string(a.id));
    if (!image_ids.count(a.image_id))
      throw ManifestError(Kind::kDanglingReference, "annotations", li,
                          "image_id " + std::to_string(a.image_id) + " not present in images");
    if (a.category_id < 0 || a.category_id >= kNumCategories)
      throw ManifestError(Kind::kInvalidValue, "annotations", li,
                          "category_id " + std::to_string(a.category_id) + " outside [0, 9]");
    for (const auto& k : a.keypoints)
      if (k.v < 0 || k.v > 2)
        throw ManifestError(Kind::kInvalidValue, "annotations", li, "visibility flag outside {0, 1, 2}");
    if (!(a.bbox.w > 0.0) || !(a.bbox.h > 0.0))
      throw ManifestError(Kind::kInvalidValue, "annotations", li, "bbox width and height must be positive");
    if (a.num_keypoints != count_visible(a.keypoints))
      throw ManifestError(Kind::kInvalidValue, "annotations", li,
                          "num_keypoints does not match the visible keypoint count");
  }
}

void canonicalize(DatasetManifest& m) {
  std::sort(m.images.begin(), m.images.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
  std::sort(m.annotations.begin(), m.annotations.end(),
            [](const AnnotationRecord& a, const AnnotationRecord& b) { return a.id < b.id; });
}

ojson to_json(const DatasetManifest& m) {
  ojson doc;
  doc["info"] = {{"description", "posesynth posture keypoints"},
                 {"version", 1},
                 {"split", m.split},
                 {"config_hash", m.config_hash}};
  ojson images = ojson::array();
  for (const auto& im : m.images) images.push_back(image_json(im));
  ojson anns = ojson::array();
  for (const auto& a : m.annotations) anns.push_back(annotation_json(a));
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(anns);
  doc["categories"] = categories_json();
  return doc;
}

DatasetManifest manifest_from_json(const json& doc) {
  if (!doc.is_object()) throw ManifestError(Kind::kSchema, "", -1, "top level must be an object");
  DatasetManifest m;
  if (auto it = doc.find("info"); it != doc.end()) {
    m.split = it->value("split", std::string("all"));
    m.config_hash = it->value("config_hash", std::string());
  }
  for (const char* section : {"images", "annotations"}) {
    auto it = doc.find(section);
    if (it == doc.end() || !it->is_array())
      throw ManifestError(Kind::kSchema, section, -1, "missing array");
  }
  const json& images = doc["images"];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const json& r = images[i];
    const long li = long(i);
    if (!r.is_object()) throw ManifestError(Kind::kSchema, "images", li, "record must be an object");
    ImageRecord im;
    im.id = get_long(r, "id", "images", li);
    im.file_name = get_string(r, "file_name", "images", li);
    im.width = int(get_long(r, "width", "images", li));
    im.height = int(get_long(r, "height", "images", li));
    if (auto p = r.find("provenance"); p != r.end()) {
      if (!p->is_object()) throw ManifestError(Kind::kSchema, "images", li, "provenance must be an object");
      im.provenance.template_id = int(get_long(*p, "template_id", "images", li));
      im.provenance.seed = parse_seed(get_string(*p, "seed", "images", li), li);
      im.provenance.prompt_id = get_string(*p, "prompt_id", "images", li);
    }
    m.images.push_back(std::move(im));
  }
  const json& anns = doc["annotations"];
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const json& r = anns[i];
    const long li = long(i);
    if (!r.is_object()) throw ManifestError(Kind::kSchema, "annotations", li, "record must be an object");
    AnnotationRecord a;
    a.id = get_long(r, "id", "annotations", li);
    a.image_id = get_long(r, "image_id", "annotations", li);
    a.category_id = int(get_long(r, "category_id", "annotations", li));
    a.num_keypoints = int(get_long(r, "num_keypoints", "annotations", li));
    const json& kp = field(r, "keypoints", "annotations", li);
    if (!kp.is_array() || kp.size() != 3 * kNumKeypoints)
      throw ManifestError(Kind::kSchema, "annotations", li, "keypoints must hold 51 numbers");
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      a.keypoints[k].x = get_number(kp[3 * k], "keypoints", "annotations", li);
      a.keypoints[k].y = get_number(kp[3 * k + 1], "keypoints", "annotations", li);
      if (!kp[3 * k + 2].is_number_integer())
        throw ManifestError(Kind::kSchema, "annotations", li, "visibility flags must be integers");
      a.keypoints[k].v = kp[3 * k + 2].get<int>();
    }
    const json& bb = field(r, "bbox", "annotations", li);
    if (!bb.is_array() || bb.size() != 4)
      throw ManifestError(Kind::kSchema, "annotations", li, "bbox must hold 4 numbers");
    a.bbox = {get_number(bb[0], "bbox", "annotations", li), get_number(bb[1], "bbox", "annotations", li),
              get_number(bb[2], "bbox", "annotations", li), get_number(bb[3], "bbox", "annotations", li)};
    m.annotations.push_back(a);
  }
  validate(m);
  return m;
}

std::string serialize_coco(const DatasetManifest& m) {
  validate(m);
  DatasetManifest sorted = m;
  canonicalize(sorted);
  const ojson doc = to_json(sorted);
  // One record per line keeps large manifests diffable.
  std::string out = "{\n";
  bool first_key = true;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!first_key) out += ",\n";
    first_key = false;
    out += "  " + ojson(it.key()).dump() + ": ";
    if (it->is_array()) {
      if (it->empty()) {
        out += "[]";
        continue;
      }
      out += "[\n";
      for (std::size_t i = 0; i < it->size(); ++i) {
        out += "    " + (*it)[i].dump();
        out += i + 1 < it->size() ? ",\n" : "\n";
      }
      out += "  ]";
    } else {
      out += it->dump();
    }
  }
  out += "\n}\n";
  return out;
}

DatasetManifest parse_coco(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError(Kind::kMalformedJson, "", -1, e.what());
  }
  return manifest_from_json(doc);
}

void write_coco(const DatasetManifest& m, const std::filesystem::path& path) {
  write_text_file(path, serialize_coco(m));
}

DatasetManifest read_coco(const std::filesystem::path& path) { return parse_coco(read_text_file(path)); }

DatasetManifest subset(const DatasetManifest& m, const std::vector<long>& image_ids, std::string split) {
  const std::set<long> keep(image_ids.begin(), image_ids.end());
  DatasetManifest out;
  out.split = std::move(split);
  out.config_hash = m.config_hash;
  for (const auto& im : m.images)
    if (keep.count(im.id)) out.images.push_back(im);
  for (const auto& a : m.annotations)
    if (keep.count(a.image_id)) out.annotations.push_back(a);
  canonicalize(out);
  return out;
}

std::pair<DatasetManifest, DatasetManifest> stratified_split(const DatasetManifest& m, double train_ratio,
                                                             double val_ratio, std::uint64_t seed) {
  if (train_ratio < 0.0 || val_ratio < 0.0 || std::abs(train_ratio + val_ratio - 1.0) > 1e-9)
    throw SplitError("split ratios must be non-negative and sum to 1");
  validate(m);
  std::map<int, std::vector<long>> by_class;
  for (const auto& a : m.annotations) by_class[a.category_id].push_back(a.image_id);

  std::vector<long> train, val;
  for (auto& [cls, ids] : by_class) {
    if (ids.size() < 2)
      throw SplitError("class " + std::to_string(cls) + " has fewer than 2 samples");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(cls)}));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    // The small epsilon keeps exact products such as 100 * 0.1 from flooring low.
    const auto n_val = static_cast<std::size_t>(std::floor(double(ids.size()) * val_ratio + 1e-9));
    val.insert(val.end(), ids.begin(), ids.begin() + long(n_val));
    train.insert(train.end(), ids.begin() + long(n_val), ids.end());
  }
  return {subset(m, train, "train"), subset(m, val, "val")};
}

}  // namespace posesynth
