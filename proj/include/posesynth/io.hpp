#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace posesynth {

using ojson = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);

// Creates parent directories. Writes to a temporary name and renames so
// readers never observe a half-written file.
void write_text_file(const std::filesystem::path& path, const std::string& text);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Two-space indented, trailing newline.
void write_json_file(const std::filesystem::path& path, const ojson& doc);

// Round half-to-even at two decimals, the on-disk pixel precision.
inline double round2(double x) { return std::nearbyint(x * 100.0) / 100.0; }

}  // namespace posesynth
