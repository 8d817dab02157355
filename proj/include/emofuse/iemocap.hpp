#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emofuse/dataset.hpp"
#include "emofuse/error.hpp"
#include "emofuse/labels.hpp"

namespace emofuse::iemocap {

namespace fs = std::filesystem;

// Sub-paths of the distributed corpus layout, relative to each Session{k}
// directory. They are configuration because corpus copies differ in which
// MoCap exports they carry.
struct CorpusConfig {
  std::string emo_eval_dir = "dialog/EmoEvaluation";
  std::string transcription_dir = "dialog/transcriptions";
  std::string wav_dir = "sentences/wav";  // wav_dir/<dialog>/<utterance>.wav
  std::string mocap_facial_dir = "dialog/MOCAP_rotated";
  std::string mocap_hand_dir = "dialog/MOCAP_hand";
  std::string mocap_head_dir = "dialog/MOCAP_head";
  int sample_rate_hz = 16000;
  // false: trust the corpus's own assigned (majority) label on the summary
  // line. true: recompute the majority over the categorical annotator lines;
  // ties are excluded.
  bool strict_agreement = false;
};

struct IngestResult {
  DatasetManifest manifest;
  std::vector<std::pair<std::string, std::string>> skips;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Full categorical annotator names as they appear in C-E lines.
inline std::optional<EmotionLabel> map_categorical(const std::string& name) {
  std::string n = lower(name);
  if (n.rfind("neutral", 0) == 0) return EmotionLabel::neutral;
  if (n.rfind("happiness", 0) == 0 || n.rfind("happy", 0) == 0)
    return EmotionLabel::excited;
  if (n.rfind("excited", 0) == 0 || n.rfind("excitement", 0) == 0)
    return EmotionLabel::excited;
  if (n.rfind("anger", 0) == 0 || n.rfind("angry", 0) == 0)
    return EmotionLabel::angry;
  if (n.rfind("sadness", 0) == 0 || n.rfind("sad", 0) == 0)
    return EmotionLabel::sad;
  return std::nullopt;
}

struct Turn {
  std::string id;
  double start = 0.0;
  double end = 0.0;
  std::string summary_code;                // e.g. "neu", "hap", "xxx"
  std::vector<std::string> categoricals;   // raw annotator label names
};

// Summary line: "[6.2901 - 8.2357]\tSes01F_impro01_F000\tneu\t[...]".
inline bool parse_summary_line(const std::string& line, Turn& out) {
  if (line.empty() || line[0] != '[') return false;
  std::size_t dash = line.find(" - ");
  std::size_t close = line.find(']');
  if (dash == std::string::npos || close == std::string::npos || dash > close)
    return false;
  try {
    out.start = std::stod(line.substr(1, dash - 1));
    out.end = std::stod(line.substr(dash + 3, close - dash - 3));
  } catch (...) {
    return false;
  }
  // Remaining fields are tab separated.
  std::vector<std::string> fields;
  std::size_t pos = close + 1;
  while (pos < line.size()) {
    std::size_t tab = line.find('\t', pos);
    std::string f = line.substr(pos, tab == std::string::npos ? std::string::npos
                                                              : tab - pos);
    if (!f.empty()) fields.push_back(f);
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  if (fields.size() < 2) return false;
  out.id = fields[0];
  out.summary_code = fields[1];
  return true;
}

// Categorical annotator line: "C-E2:\tNeutral;\t()" (may list several).
inline void parse_categorical_line(const std::string& line, Turn& turn) {
  std::size_t colon = line.find(':');
  if (colon == std::string::npos) return;
  std::string rest = line.substr(colon + 1);
  std::size_t begin = 0;
  while (begin < rest.size()) {
    std::size_t semi = rest.find(';', begin);
    if (semi == std::string::npos) break;
    std::string item = rest.substr(begin, semi - begin);
    // trim
    while (!item.empty() && (item.front() == ' ' || item.front() == '\t'))
      item.erase(item.begin());
    while (!item.empty() && (item.back() == ' ' || item.back() == '\t'))
      item.pop_back();
    if (!item.empty() && item.find('(') == std::string::npos)
      turn.categoricals.push_back(item);
    begin = semi + 1;
  }
}

inline std::vector<Turn> parse_eval_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("iemocap: cannot open evaluation file " + path);
  std::vector<Turn> turns;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Turn t;
    if (parse_summary_line(line, t)) {
      turns.push_back(std::move(t));
    } else if (line.rfind("C-", 0) == 0 && !turns.empty()) {
      parse_categorical_line(line, turns.back());
    }
  }
  return turns;
}

// Transcription line: "Ses01F_impro01_F000 [006.29-008.23]: Excuse me."
inline void parse_transcriptions(const std::string& path,
                                 std::map<std::string, std::string>& out) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t sp = line.find(' ');
    std::size_t colon = line.find(':');
    if (sp == std::string::npos || colon == std::string::npos || colon < sp)
      continue;
    std::string id = line.substr(0, sp);
    std::string text = line.substr(colon + 1);
    if (!text.empty() && text.front() == ' ') text.erase(text.begin());
    if (!id.empty() && !text.empty()) out[id] = text;
  }
}

// Majority over annotator categoricals mapped into the schema; ties and
// empty votes yield nullopt.
inline std::optional<EmotionLabel> strict_majority(
    const std::vector<std::string>& categoricals) {
  std::array<int, kNumClasses> votes = {0, 0, 0, 0};
  for (const auto& c : categoricals) {
    auto m = map_categorical(c);
    if (m) ++votes[static_cast<std::size_t>(label_id(*m))];
  }
  int best = -1, best_count = 0;
  bool tie = false;
  for (int i = 0; i < kNumClasses; ++i) {
    if (votes[static_cast<std::size_t>(i)] > best_count) {
      best = i;
      best_count = votes[static_cast<std::size_t>(i)];
      tie = false;
    } else if (votes[static_cast<std::size_t>(i)] == best_count && best_count > 0) {
      tie = true;
    }
  }
  if (best < 0 || tie) return std::nullopt;
  return label_from_id(best);
}

// "Ses01F_impro01_F000" -> speaker "Ses01_F" (session + turn gender).
inline std::string speaker_of(const std::string& utt_id, int session) {
  char gender = '?';
  std::size_t us = utt_id.rfind('_');
  if (us != std::string::npos && us + 1 < utt_id.size())
    gender = utt_id[us + 1];
  return "Ses" + std::to_string(session) + "_" + gender;
}

}  // namespace detail

// Walks the licensed corpus and returns only utterances whose label maps
// into the four-category schema (happy merged into excited). Out-of-schema
// and no-agreement turns land in the skip report.
inline IngestResult build_iemocap_manifest(const std::string& corpus_root,
                                           const CorpusConfig& cfg = {}) {
  IngestResult result;
  result.manifest.source = "iemocap";
  result.manifest.base_dir = corpus_root;

  std::vector<std::string> missing;
  for (int session = 1; session <= 5; ++session) {
    fs::path sdir = fs::path(corpus_root) / ("Session" + std::to_string(session));
    if (!fs::is_directory(sdir))
      missing.push_back(sdir.string());
    else if (!fs::is_directory(sdir / cfg.emo_eval_dir))
      missing.push_back((sdir / cfg.emo_eval_dir).string());
  }
  if (!missing.empty()) {
    std::string msg = "iemocap: missing corpus components:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw MissingArtifactError(msg);
  }

  for (int session = 1; session <= 5; ++session) {
    fs::path sdir = fs::path(corpus_root) / ("Session" + std::to_string(session));
    fs::path eval_dir = sdir / cfg.emo_eval_dir;

    std::vector<fs::path> eval_files;
    for (const auto& e : fs::directory_iterator(eval_dir))
      if (e.is_regular_file() && e.path().extension() == ".txt")
        eval_files.push_back(e.path());
    std::sort(eval_files.begin(), eval_files.end());

    for (const auto& eval_file : eval_files) {
      std::string dialog = eval_file.stem().string();

      std::map<std::string, std::string> transcripts;
      detail::parse_transcriptions(
          (sdir / cfg.transcription_dir / (dialog + ".txt")).string(),
          transcripts);

      auto mocap_ref = [&](const std::string& dir) -> std::optional<std::string> {
        fs::path p = sdir / dir / (dialog + ".txt");
        if (!fs::exists(p)) return std::nullopt;
        return fs::relative(p, corpus_root).string();
      };
      auto facial_ref = mocap_ref(cfg.mocap_facial_dir);
      auto hand_ref = mocap_ref(cfg.mocap_hand_dir);
      auto head_ref = mocap_ref(cfg.mocap_head_dir);

      for (const auto& turn : detail::parse_eval_file(eval_file.string())) {
        std::optional<EmotionLabel> label;
        if (cfg.strict_agreement) {
          label = detail::strict_majority(turn.categoricals);
          if (!label) {
            result.skips.emplace_back(turn.id,
                                      "no annotator majority in schema");
            continue;
          }
        } else {
          label = map_raw_label(turn.summary_code);
          if (!label) {
            result.skips.emplace_back(
                turn.id, "label outside schema: " + turn.summary_code);
            continue;
          }
        }

        UtteranceRecord r;
        r.utterance_id = turn.id;
        r.session_id = session;
        r.speaker_id = detail::speaker_of(turn.id, session);
        r.start_time_s = turn.start;
        r.end_time_s = turn.end;
        r.label = *label;
        r.sample_rate_hz = cfg.sample_rate_hz;

        fs::path wav = sdir / cfg.wav_dir / dialog / (turn.id + ".wav");
        if (fs::exists(wav))
          r.audio_ref = fs::relative(wav, corpus_root).string();
        if (auto it = transcripts.find(turn.id); it != transcripts.end())
          r.transcript = it->second;
        r.mocap_refs.facial = facial_ref;
        r.mocap_refs.hand = hand_ref;
        r.mocap_refs.head = head_ref;

        if (!(r.end_time_s > r.start_time_s)) {
          result.skips.emplace_back(turn.id, "degenerate time window");
          continue;
        }
        result.manifest.records.push_back(std::move(r));
      }
    }
  }
  result.manifest.recount();
  return result;
}

}  // namespace emofuse::iemocap
