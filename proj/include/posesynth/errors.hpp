#pragma once

#include <stdexcept>
#include <string>

namespace posesynth {

// Every stage reports failures through one of these. The pipeline CLI maps
// them to exit codes and prefixes messages with the stage name.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

class AnnotationError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class FilterError : public Error {
 public:
  using Error::Error;
};

class FeatureError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Manifest parsing/validation problems carry the offending record index so
// the message can point at the exact entry.
class ManifestError : public Error {
 public:
  enum class Kind { kMalformedJson, kSchema, kDanglingReference, kDuplicateId, kInvalidValue };

  ManifestError(Kind kind, std::string section, long index, const std::string& what)
      : Error(describe(kind, section, index, what)),
        kind_(kind),
        section_(std::move(section)),
        index_(index) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& section() const noexcept { return section_; }
  long index() const noexcept { return index_; }

 private:
  static std::string describe(Kind kind, const std::string& section, long index,
                              const std::string& what) {
    const char* tag = "";
    switch (kind) {
      case Kind::kMalformedJson: tag = "malformed json"; break;
      case Kind::kSchema: tag = "schema violation"; break;
      case Kind::kDanglingReference: tag = "dangling reference"; break;
      case Kind::kDuplicateId: tag = "duplicate id"; break;
      case Kind::kInvalidValue: tag = "invalid value"; break;
    }
    std::string msg = std::string(tag);
    if (!section.empty()) {
      msg += " in " + section;
      if (index >= 0) msg += "[" + std::to_string(index) + "]";
    }
    return msg + ": " + what;
  }

  Kind kind_;
  std::string section_;
  long index_;
};

}  // namespace posesynth
