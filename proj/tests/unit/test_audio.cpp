#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "emofuse/audio_prep.hpp"
#include "emofuse/rng.hpp"
#include "support/oracles.hpp"

using namespace emofuse;

namespace {

std::vector<double> tone(double hz, double seconds, int rate) {
  std::vector<double> out(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.7 * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  return out;
}

}  // namespace

TEST_CASE("a full-length 16 kHz clip is returned unchanged") {
  SpeechHeadConfig cfg;
  std::vector<double> x(246000);
  Rng rng(1);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  auto out = prepare_audio(x, 16000, cfg);
  REQUIRE(out.samples == x);
  REQUIRE(out.valid_samples == 246000);
  REQUIRE_FALSE(out.degenerate);
}

TEST_CASE("short input keeps content and zero-pads the tail") {
  std::vector<double> x(123000, 0.25);
  auto out = prepare_audio(x, 16000);
  REQUIRE(out.samples.size() == 246000);
  REQUIRE(out.valid_samples == 123000);
  for (std::size_t i = 0; i < 123000; ++i) REQUIRE(out.samples[i] == 0.25);
  for (std::size_t i = 123000; i < 246000; ++i) REQUIRE(out.samples[i] == 0.0);
}

TEST_CASE("over-long input is center-truncated") {
  std::vector<double> x(246000 * 2, 0.0);
  // mark the exact center window
  std::size_t start = (x.size() - 246000) / 2;
  for (std::size_t i = 0; i < 246000; ++i)
    x[start + i] = static_cast<double>(i % 97) / 97.0;
  auto out = prepare_audio(x, 16000);
  REQUIRE(out.valid_samples == 246000);
  for (std::size_t i = 0; i < 246000; ++i)
    REQUIRE(out.samples[i] == x[start + i]);
}

TEST_CASE("8 kHz input resamples to roughly twice the length") {
  std::vector<double> x(12000, 0.1);
  auto resampled = resample_linear(x, 8000, 16000);
  REQUIRE(resampled.size() >= 2 * x.size() - 1);
  REQUIRE(resampled.size() <= 2 * x.size() + 1);
}

TEST_CASE("resampling preserves the dominant frequency of a 440 Hz tone") {
  auto x = tone(440.0, 1.0, 8000);
  auto resampled = resample_linear(x, 8000, 16000);
  double peak = oracle::dominant_frequency_hz(resampled, 16000.0, 400.0, 480.0);
  REQUIRE(std::abs(peak - 440.0) <= 1.0);
}

TEST_CASE("resampling at the target rate is the identity") {
  Rng rng(4);
  std::vector<double> x(500);
  for (auto& v : x) v = rng.normal();
  REQUIRE(resample_linear(x, 16000, 16000) == x);
}

TEST_CASE("empty waveform is rejected, all-zero is flagged degenerate") {
  REQUIRE_THROWS_AS(prepare_audio({}, 16000), ValidationError);
  std::vector<double> zeros(1000, 0.0);
  auto out = prepare_audio(zeros, 16000);
  REQUIRE(out.degenerate);
  REQUIRE(out.samples.size() == 246000);
}

TEST_CASE("output length is always exactly max_samples") {
  Rng rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    int rate = (trial % 3 == 0) ? 8000 : (trial % 3 == 1 ? 16000 : 44100);
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 400000));
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    auto out = prepare_audio(x, rate);
    REQUIRE(out.samples.size() == 246000);
    REQUIRE(out.valid_samples <= 246000);
    REQUIRE(out.valid_samples >= 1);
  }
}
