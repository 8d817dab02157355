#pragma once

#include <array>
#include <optional>
#include <string>

#include "emofuse/error.hpp"

namespace emofuse {

// The four-category schema. Order is fixed and shared by every report and
// confusion matrix: neutral, excited, angry, sad.
enum class EmotionLabel : int { neutral = 0, excited = 1, angry = 2, sad = 3 };

inline constexpr int kNumClasses = 4;

inline constexpr std::array<const char*, kNumClasses> kLabelNames = {
    "neutral", "excited", "angry", "sad"};

inline int label_id(EmotionLabel l) { return static_cast<int>(l); }

inline EmotionLabel label_from_id(int id) {
  if (id < 0 || id >= kNumClasses)
    throw ValidationError("label id out of range: " + std::to_string(id));
  return static_cast<EmotionLabel>(id);
}

inline const char* label_name(EmotionLabel l) {
  return kLabelNames[static_cast<std::size_t>(label_id(l))];
}

// Maps a raw annotation into the schema. "happy" and "excited" land on the
// same id; anything else is rejected (nullopt), never relabeled. Accepts the
// IEMOCAP three-letter codes alongside full names.
inline std::optional<EmotionLabel> map_raw_label(const std::string& raw) {
  if (raw == "neutral" || raw == "neu") return EmotionLabel::neutral;
  if (raw == "excited" || raw == "exc") return EmotionLabel::excited;
  if (raw == "happy" || raw == "hap") return EmotionLabel::excited;
  if (raw == "angry" || raw == "ang") return EmotionLabel::angry;
  if (raw == "sad") return EmotionLabel::sad;
  return std::nullopt;
}

inline EmotionLabel label_from_name(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (name == kLabelNames[static_cast<std::size_t>(i)])
      return static_cast<EmotionLabel>(i);
  throw ValidationError("unknown label name: " + name);
}

}  // namespace emofuse
