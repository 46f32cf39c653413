#include "posesynth/prompt.hpp"

#include <set>

#include "embedded_config.hpp"
#include "posesynth/errors.hpp"
#include "posesynth/io.hpp"
#include "posesynth/random.hpp"

namespace posesynth {
namespace {

PromptAttributes from_index(const Vocabulary& vocab, const std::array<std::size_t, kPromptDims>& index) {
  PromptAttributes p;
  p.index = index;
  for (std::size_t d = 0; d < kPromptDims; ++d) p.phrases[d] = vocab.phrases[d][index[d]];
  p.negative_prompt = vocab.negative_prompt;
  return p;
}

}  // namespace

void Vocabulary::validate() const {
  for (std::size_t d = 0; d < kPromptDims; ++d) {
    if (phrases[d].empty()) throw ConfigError(std::string("vocabulary dimension '") + kPromptDimNames[d] + "' is empty");
    std::set<std::string> seen;
    for (const auto& p : phrases[d]) {
      if (p.empty()) throw ConfigError(std::string("empty phrase in vocabulary dimension '") + kPromptDimNames[d] + "'");
      if (!seen.insert(p).second)
        throw ConfigError("phrase '" + p + "' repeated in vocabulary dimension '" + kPromptDimNames[d] + "'");
    }
  }
}

std::uint64_t Vocabulary::combinations() const {
  std::uint64_t n = 1;
  for (const auto& v : phrases) n *= v.size();
  return n;
}

Vocabulary parse_vocabulary(const nlohmann::json& doc) {
  Vocabulary v;
  if (!doc.is_object() || !doc.contains("dimensions") || !doc["dimensions"].is_object())
    throw ConfigError("vocabulary needs a 'dimensions' object");
  const auto& dims = doc["dimensions"];
  for (std::size_t d = 0; d < kPromptDims; ++d) {
    auto it = dims.find(kPromptDimNames[d]);
    if (it == dims.end() || !it->is_array())
      throw ConfigError(std::string("vocabulary dimension '") + kPromptDimNames[d] + "' missing");
    for (const auto& p : *it) {
      if (!p.is_string()) throw ConfigError("vocabulary phrases must be strings");
      v.phrases[d].push_back(p.get<std::string>());
    }
  }
  for (auto it = dims.begin(); it != dims.end(); ++it) {
    bool known = false;
    for (const char* n : kPromptDimNames) known = known || it.key() == n;
    if (!known) throw ConfigError("unknown vocabulary dimension '" + it.key() + "'");
  }
  v.negative_prompt = doc.value("negative_prompt", std::string());
  v.validate();
  return v;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  try {
    return parse_vocabulary(read_json_file(path));
  } catch (const IoError& e) {
    throw ConfigError(std::string("vocabulary: ") + e.what());
  }
}

const Vocabulary& default_vocabulary() {
  static const Vocabulary v = parse_vocabulary(nlohmann::json::parse(embedded::kVocabularyJson));
  return v;
}

std::string PromptAttributes::text() const {
  // a, g, b, h, s, e
  return "a photo of " + phrases[0] + ", " + phrases[1] + ", " + phrases[2] + ", " + phrases[3] + ", wearing " +
         phrases[4] + ", sitting at a desk in " + phrases[5];
}

std::string PromptAttributes::id() const {
  static constexpr char kTags[kPromptDims] = {'a', 'g', 'b', 'h', 's', 'e'};
  std::string out;
  for (std::size_t d = 0; d < kPromptDims; ++d) {
    if (d) out += '-';
    out += kTags[d];
    out += std::to_string(index[d]);
  }
  return out;
}

PromptAttributes compose_prompt(const Vocabulary& vocab, std::uint64_t seed) {
  vocab.validate();
  Rng rng(seed);
  std::array<std::size_t, kPromptDims> index{};
  for (std::size_t d = 0; d < kPromptDims; ++d) index[d] = std::size_t(rng.below(vocab.phrases[d].size()));
  PromptAttributes p = from_index(vocab, index);
  p.seed = seed;
  return p;
}

std::uint64_t prompt_rank(const Vocabulary& vocab, const std::array<std::size_t, kPromptDims>& index) {
  std::uint64_t r = 0;
  for (std::size_t d = 0; d < kPromptDims; ++d) r = r * vocab.phrases[d].size() + index[d];
  return r;
}

PromptAttributes prompt_from_rank(const Vocabulary& vocab, std::uint64_t rank) {
  std::array<std::size_t, kPromptDims> index{};
  for (std::size_t d = kPromptDims; d-- > 0;) {
    index[d] = std::size_t(rank % vocab.phrases[d].size());
    rank /= vocab.phrases[d].size();
  }
  return from_index(vocab, index);
}

}  // namespace posesynth
