#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace posesynth {

// Attribute dimensions in composition order: age, gender, body, hair,
// clothing, background.
inline constexpr std::size_t kPromptDims = 6;
inline constexpr std::array<const char*, kPromptDims> kPromptDimNames = {"age",  "gender",   "body",
                                                                          "hair", "clothing", "background"};

struct Vocabulary {
  std::array<std::vector<std::string>, kPromptDims> phrases;
  std::string negative_prompt;

  // Throws ConfigError on an empty dimension or a repeated phrase.
  void validate() const;
  // Number of distinct prompts, the product of the dimension sizes.
  std::uint64_t combinations() const;
};

Vocabulary parse_vocabulary(const nlohmann::json& doc);
Vocabulary load_vocabulary(const std::filesystem::path& path);
const Vocabulary& default_vocabulary();

struct PromptAttributes {
  std::array<std::size_t, kPromptDims> index{};
  std::array<std::string, kPromptDims> phrases;
  std::string negative_prompt;
  std::uint64_t seed = 0;

  std::string text() const;
  // Stable short id such as "a1-g0-b2-h3-s0-e5".
  std::string id() const;
};

// One independent uniform draw per dimension, in composition order.
PromptAttributes compose_prompt(const Vocabulary& vocab, std::uint64_t seed);

// Mixed-radix encoding of an index vector (age most significant) and its inverse.
std::uint64_t prompt_rank(const Vocabulary& vocab, const std::array<std::size_t, kPromptDims>& index);
PromptAttributes prompt_from_rank(const Vocabulary& vocab, std::uint64_t rank);

}  // namespace posesynth
