#pragma once

namespace posesynth::embedded {

extern const char* const kSkeletonJson;
extern const char* const kVocabularyJson;
extern const char* const kPipelineJson;

}  // namespace posesynth::embedded
