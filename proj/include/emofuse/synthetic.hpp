#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "emofuse/dataset.hpp"
#include "emofuse/mocap/stream.hpp"
#include "emofuse/rng.hpp"
#include "emofuse/wav.hpp"

namespace emofuse::synth {

// Class signatures are fixed formulas so that overfit tests mean something:
//
//   audio     x(t) = 0.5 sin(2*pi*f_c t) + 0.02 eta,   f_c = 220 (c+1) Hz
//   mocap     v_j(t) = o_c + a_c sin(2*pi*g_c t + 0.35 j + m) + 0.01 eta
//             o_c = 0.6 c - 0.9,  a_c = 0.25 + 0.1 c,  g_c = 0.8 + 0.6 c Hz
//             (c = class id, j = feature column, m = sub-mode index)
//   text      class-keyword sentence templates below
//
// eta is unit Gaussian noise from the record's own RNG stream.

inline double class_tone_hz(int class_id) { return 220.0 * (class_id + 1); }
inline double class_offset(int class_id) { return 0.6 * class_id - 0.9; }
inline double class_amplitude(int class_id) { return 0.25 + 0.1 * class_id; }
inline double class_freq_hz(int class_id) { return 0.8 + 0.6 * class_id; }

inline const std::vector<std::string>& transcript_templates(int class_id) {
  static const std::vector<std::string> kTemplates[kNumClasses] = {
      {"the schedule for today remains the same as planned",
       "the report is on the desk and the meeting starts at noon",
       "we will proceed with the usual agenda this afternoon"},
      {"wow this is absolutely wonderful i can hardly wait",
       "this is amazing news i am thrilled beyond words",
       "fantastic we finally did it what a glorious day"},
      {"this is completely unacceptable and i am furious",
       "stop it right now you are making me really angry",
       "how dare you ruin everything i am outraged"},
      {"i feel so empty and everything seems hopeless",
       "nothing matters anymore i just want to be alone",
       "the sorrow will not leave me and i keep crying"}};
  return kTemplates[static_cast<std::size_t>(class_id)];
}

inline WavData make_audio(int class_id, double duration_s, int sample_rate_hz,
                          Rng& rng) {
  WavData wav;
  wav.sample_rate_hz = sample_rate_hz;
  auto n = static_cast<std::size_t>(duration_s * sample_rate_hz);
  wav.samples.resize(n);
  const double f = class_tone_hz(class_id);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sample_rate_hz;
    wav.samples[i] =
        0.5 * std::sin(2.0 * std::numbers::pi * f * t) + 0.02 * rng.normal();
  }
  return wav;
}

inline mocap::SubModeStream make_mocap_stream(int class_id, SubMode mode,
                                              double duration_s,
                                              double frame_rate_hz, Rng& rng) {
  mocap::SubModeStream s;
  s.sub_mode = mode;
  s.feature_dim = sub_mode_dim(mode);
  auto n = static_cast<std::size_t>(duration_s * frame_rate_hz);
  const double o = class_offset(class_id);
  const double a = class_amplitude(class_id);
  const double g = class_freq_hz(class_id);
  const double m = static_cast<double>(mode);
  s.frames.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / frame_rate_hz;
    s.frames[i].timestamp_s = t;
    s.frames[i].values.resize(static_cast<std::size_t>(s.feature_dim));
    for (int j = 0; j < s.feature_dim; ++j)
      s.frames[i].values[static_cast<std::size_t>(j)] =
          o + a * std::sin(2.0 * std::numbers::pi * g * t + 0.35 * j + m) +
          0.01 * rng.normal();
  }
  return s;
}

inline std::string make_transcript(int class_id, Rng& rng) {
  const auto& templates = transcript_templates(class_id);
  return templates[rng.below(templates.size())];
}

// Deterministic synthetic dataset: n_per_class records per label, sessions
// round-robin 1..5, media written under out_dir (audio/, mocap/), refs
// relative to the manifest directory. Identical (n_per_class, seed) yield
// byte-identical manifests and media.
inline DatasetManifest generate_synthetic(int n_per_class, std::uint64_t seed,
                                          const std::string& out_dir) {
  if (n_per_class < 1)
    throw ValidationError("generate_synthetic: n_per_class must be >= 1");

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "audio");
  fs::create_directories(fs::path(out_dir) / "mocap");

  DatasetManifest manifest;
  manifest.source = "synthetic";
  manifest.base_dir = out_dir;

  const int sample_rate = 16000;
  const double frame_rate = 100.0;
  Rng root(seed);

  int index = 0;
  for (int i = 0; i < n_per_class; ++i) {
    for (int c = 0; c < kNumClasses; ++c, ++index) {
      Rng rec_rng = root.fork(static_cast<std::uint64_t>(index));
      char id[64];
      std::snprintf(id, sizeof(id), "syn_%s_%04d", kLabelNames[static_cast<std::size_t>(c)], i);

      UtteranceRecord r;
      r.utterance_id = id;
      r.session_id = (index % 5) + 1;
      r.speaker_id = "spk" + std::to_string(r.session_id) +
                     ((index / 5) % 2 == 0 ? "A" : "B");
      r.sample_rate_hz = sample_rate;
      r.start_time_s = 0.0;
      r.end_time_s = 1.0 + rec_rng.uniform();  // 1..2 s
      r.label = label_from_id(c);
      r.transcript = make_transcript(c, rec_rng);

      double duration = r.end_time_s - r.start_time_s;

      std::string audio_rel = std::string("audio/") + id + ".wav";
      write_wav((fs::path(out_dir) / audio_rel).string(),
                make_audio(c, duration, sample_rate, rec_rng));
      r.audio_ref = audio_rel;

      for (int mode = 0; mode < 3; ++mode) {
        auto sm = static_cast<SubMode>(mode);
        std::string rel = std::string("mocap/") + id + "_" +
                          sub_mode_name(sm) + ".txt";
        mocap::write_stream(
            make_mocap_stream(c, sm, duration, frame_rate, rec_rng),
            (fs::path(out_dir) / rel).string());
        switch (sm) {
          case SubMode::facial: r.mocap_refs.facial = rel; break;
          case SubMode::hand: r.mocap_refs.hand = rel; break;
          case SubMode::head: r.mocap_refs.head = rel; break;
        }
      }
      manifest.records.push_back(std::move(r));
    }
  }
  manifest.recount();
  return manifest;
}

}  // namespace emofuse::synth
