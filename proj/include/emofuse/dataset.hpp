#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "emofuse/error.hpp"
#include "emofuse/labels.hpp"

namespace emofuse {

using json = nlohmann::json;

enum class SubMode : int { facial = 0, hand = 1, head = 2 };

inline constexpr std::array<const char*, 3> kSubModeNames = {"facial", "hand",
                                                             "head"};
inline constexpr std::array<int, 3> kSubModeDims = {165, 18, 6};

inline const char* sub_mode_name(SubMode m) {
  return kSubModeNames[static_cast<std::size_t>(m)];
}
inline int sub_mode_dim(SubMode m) {
  return kSubModeDims[static_cast<std::size_t>(m)];
}

struct MoCapRefs {
  std::optional<std::string> facial;
  std::optional<std::string> hand;
  std::optional<std::string> head;

  const std::optional<std::string>& by_mode(SubMode m) const {
    switch (m) {
      case SubMode::facial: return facial;
      case SubMode::hand: return hand;
      default: return head;
    }
  }
  bool any() const {
    return facial.has_value() || hand.has_value() || head.has_value();
  }
};

// One IEMOCAP-style utterance. Missing modalities stay missing (nullopt);
// downstream code consults the availability mask instead of sniffing for
// empty strings.
struct UtteranceRecord {
  std::string utterance_id;
  int session_id = 0;  // 1..5
  std::string speaker_id;
  std::optional<std::string> audio_ref;
  int sample_rate_hz = 16000;
  std::optional<std::string> transcript;
  MoCapRefs mocap_refs;
  double start_time_s = 0.0;
  double end_time_s = 0.0;
  EmotionLabel label = EmotionLabel::neutral;

  bool has_audio() const { return audio_ref.has_value(); }
  bool has_text() const { return transcript.has_value(); }
  bool has_mocap() const { return mocap_refs.any(); }
};

struct DatasetManifest {
  std::vector<UtteranceRecord> records;
  std::array<std::size_t, kNumClasses> class_counts = {0, 0, 0, 0};
  std::string source = "iemocap";  // or "synthetic"
  // Directory the manifest was loaded from; relative refs resolve against it.
  std::string base_dir;

  std::size_t size() const { return records.size(); }

  void recount() {
    class_counts = {0, 0, 0, 0};
    for (const auto& r : records)
      ++class_counts[static_cast<std::size_t>(label_id(r.label))];
  }

  std::string resolve(const std::string& ref) const {
    std::filesystem::path p(ref);
    if (p.is_absolute() || base_dir.empty()) return ref;
    return (std::filesystem::path(base_dir) / p).string();
  }
};

namespace detail {

inline void validate_record(const UtteranceRecord& r) {
  if (r.utterance_id.empty())
    throw ValidationError("record with empty utterance_id");
  if (r.session_id < 1 || r.session_id > 5)
    throw ValidationError("utterance " + r.utterance_id +
                          ": session_id out of 1..5");
  if (!(r.end_time_s > r.start_time_s))
    throw ValidationError("utterance " + r.utterance_id +
                          ": end_time_s must exceed start_time_s");
  if (r.sample_rate_hz <= 0)
    throw ValidationError("utterance " + r.utterance_id +
                          ": nonpositive sample_rate_hz");
}

inline json record_to_json(const UtteranceRecord& r) {
  json j;
  j["utterance_id"] = r.utterance_id;
  j["session_id"] = r.session_id;
  j["speaker_id"] = r.speaker_id;
  if (r.audio_ref) j["audio_ref"] = *r.audio_ref;
  j["sample_rate_hz"] = r.sample_rate_hz;
  if (r.transcript) j["transcript"] = *r.transcript;
  if (r.mocap_refs.any()) {
    json m;
    if (r.mocap_refs.facial) m["facial"] = *r.mocap_refs.facial;
    if (r.mocap_refs.hand) m["hand"] = *r.mocap_refs.hand;
    if (r.mocap_refs.head) m["head"] = *r.mocap_refs.head;
    j["mocap_refs"] = m;
  }
  j["start_time_s"] = r.start_time_s;
  j["end_time_s"] = r.end_time_s;
  j["label"] = label_name(r.label);
  return j;
}

inline UtteranceRecord record_from_json(const json& j) {
  UtteranceRecord r;
  r.utterance_id = j.at("utterance_id").get<std::string>();
  r.session_id = j.at("session_id").get<int>();
  r.speaker_id = j.value("speaker_id", std::string());
  if (j.contains("audio_ref") && !j["audio_ref"].is_null())
    r.audio_ref = j["audio_ref"].get<std::string>();
  r.sample_rate_hz = j.value("sample_rate_hz", 16000);
  if (j.contains("transcript") && !j["transcript"].is_null())
    r.transcript = j["transcript"].get<std::string>();
  if (j.contains("mocap_refs") && !j["mocap_refs"].is_null()) {
    const json& m = j["mocap_refs"];
    if (m.contains("facial") && !m["facial"].is_null())
      r.mocap_refs.facial = m["facial"].get<std::string>();
    if (m.contains("hand") && !m["hand"].is_null())
      r.mocap_refs.hand = m["hand"].get<std::string>();
    if (m.contains("head") && !m["head"].is_null())
      r.mocap_refs.head = m["head"].get<std::string>();
  }
  r.start_time_s = j.at("start_time_s").get<double>();
  r.end_time_s = j.at("end_time_s").get<double>();
  auto mapped = map_raw_label(j.at("label").get<std::string>());
  if (!mapped)
    throw ValidationError("utterance " + r.utterance_id +
                          ": label outside the four-category schema: " +
                          j["label"].get<std::string>());
  r.label = *mapped;
  return r;
}

}  // namespace detail

// Loads a UTF-8 line-delimited manifest: one JSON record per line, fields
// named exactly as UtteranceRecord fields. Relative refs resolve against the
// manifest's directory.
inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_manifest: cannot open " + path);

  DatasetManifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();

  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("load_manifest: " + path + ":" +
                       std::to_string(line_no) + ": " + e.what());
    }
    UtteranceRecord r;
    try {
      r = detail::record_from_json(j);
    } catch (const json::exception& e) {
      throw ParseError("load_manifest: " + path + ":" +
                       std::to_string(line_no) + ": " + e.what());
    }
    detail::validate_record(r);
    if (!seen.insert(r.utterance_id).second)
      throw ValidationError("load_manifest: duplicate utterance_id \"" +
                            r.utterance_id + "\" at line " +
                            std::to_string(line_no));
    m.records.push_back(std::move(r));
  }
  m.recount();

  // Sidecar metadata (written by our ingest paths). A foreign manifest
  // without one is assumed to describe the real corpus.
  std::string meta_path = path + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream mf(meta_path);
    json meta = json::parse(mf, nullptr, /*allow_exceptions=*/false);
    if (!meta.is_discarded() && meta.contains("source"))
      m.source = meta["source"].get<std::string>();
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path,
                          const json& extra_meta = json::object()) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_manifest: cannot open " + path);
  for (const auto& r : m.records) {
    detail::validate_record(r);
    out << detail::record_to_json(r).dump() << "\n";
  }
  if (!out) throw IoError("save_manifest: short write to " + path);

  json meta = extra_meta;
  meta["source"] = m.source;
  std::ofstream mf(path + ".meta.json", std::ios::binary);
  mf << meta.dump(2) << "\n";
}

// Skip report: one excluded utterance per line, "<id>\t<reason>".
inline void write_skip_report(
    const std::vector<std::pair<std::string, std::string>>& skips,
    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_skip_report: cannot open " + path);
  for (const auto& [id, reason] : skips) out << id << "\t" << reason << "\n";
}

}  // namespace emofuse
