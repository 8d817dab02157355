#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "emofuse/error.hpp"

namespace emofuse {

struct SpeechHeadConfig {
  int max_samples = 246000;  // ~15.375 s at 16 kHz, the encoder's static length
  int sample_rate_hz = 16000;
  std::vector<int> head_widths = {256, 64};
  int n_classes = 4;
  std::string optimizer = "sgd";
  double learning_rate = 1e-5;
  int batch_size = 4;

  void validate() const {
    if (max_samples <= 0 || sample_rate_hz <= 0)
      throw ConfigError("speech head: positive max_samples/sample_rate required");
    if (batch_size < 1) throw ConfigError("speech head: batch_size >= 1");
    if (head_widths.empty()) throw ConfigError("speech head: head widths required");
  }
};

// Fixed-length model input. valid_samples counts the content before tail
// padding so downstream pooling can ignore the padding, the way an
// attention mask would.
struct PreparedAudio {
  std::vector<double> samples;
  std::size_t valid_samples = 0;
  bool degenerate = false;  // all-zero input, accepted but flagged
};

// Linear-interpolation resampling. For rate doubling an N-sample input
// becomes 2N-1 samples (endpoints preserved).
inline std::vector<double> resample_linear(const std::vector<double>& x,
                                           int from_hz, int to_hz) {
  if (from_hz <= 0 || to_hz <= 0)
    throw ValidationError("resample: nonpositive rate");
  if (x.empty() || from_hz == to_hz) return x;
  const double ratio = static_cast<double>(to_hz) / from_hz;
  const std::size_t n_out =
      static_cast<std::size_t>(std::round((x.size() - 1) * ratio)) + 1;
  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    double pos = static_cast<double>(i) / ratio;
    auto lo = static_cast<std::size_t>(pos);
    if (lo >= x.size() - 1) {
      out[i] = x.back();
      continue;
    }
    double frac = pos - static_cast<double>(lo);
    out[i] = x[lo] * (1.0 - frac) + x[lo + 1] * frac;
  }
  return out;
}

// Resample to the configured rate, center-truncate long input, zero-pad
// short input at the tail. Output length is exactly config.max_samples.
inline PreparedAudio prepare_audio(const std::vector<double>& waveform,
                                   int source_rate_hz,
                                   const SpeechHeadConfig& config = {}) {
  config.validate();
  if (waveform.empty()) throw ValidationError("prepare_audio: empty waveform");

  std::vector<double> resampled =
      resample_linear(waveform, source_rate_hz, config.sample_rate_hz);

  PreparedAudio out;
  out.degenerate = true;
  for (double v : waveform)
    if (v != 0.0) {
      out.degenerate = false;
      break;
    }

  const auto max_n = static_cast<std::size_t>(config.max_samples);
  out.samples.assign(max_n, 0.0);
  if (resampled.size() > max_n) {
    std::size_t start = (resampled.size() - max_n) / 2;  // center truncation
    std::copy(resampled.begin() + static_cast<std::ptrdiff_t>(start),
              resampled.begin() + static_cast<std::ptrdiff_t>(start + max_n),
              out.samples.begin());
    out.valid_samples = max_n;
  } else {
    std::copy(resampled.begin(), resampled.end(), out.samples.begin());
    out.valid_samples = resampled.size();
  }
  return out;
}

}  // namespace emofuse
