#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "emofuse/error.hpp"

namespace emofuse {

// Minimal mono 16-bit PCM WAV I/O. Samples are doubles in [-1, 1].
struct WavData {
  int sample_rate_hz = 16000;
  std::vector<double> samples;
};

namespace detail {
inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
}  // namespace detail

inline void write_wav(const std::string& path, const WavData& wav) {
  std::string out;
  const std::uint32_t n = static_cast<std::uint32_t>(wav.samples.size());
  const std::uint32_t data_bytes = n * 2;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(wav.sample_rate_hz));
  detail::put_u32(out, static_cast<std::uint32_t>(wav.sample_rate_hz) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double v : wav.samples) {
    double c = std::clamp(v, -1.0, 1.0);
    auto s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    detail::put_u16(out, static_cast<std::uint16_t>(s));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_wav: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write_wav: short write to " + path);
}

inline WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw ParseError("read_wav: not a RIFF/WAVE file: " + path);

  WavData wav;
  std::size_t pos = 12;
  bool have_fmt = false;
  int channels = 1;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    std::uint32_t chunk = detail::get_u32(buf.data() + pos + 4);
    pos += 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (pos + 16 > buf.size()) throw ParseError("read_wav: truncated fmt chunk");
      std::uint16_t format = detail::get_u16(buf.data() + pos);
      channels = detail::get_u16(buf.data() + pos + 2);
      wav.sample_rate_hz = static_cast<int>(detail::get_u32(buf.data() + pos + 4));
      std::uint16_t bits = detail::get_u16(buf.data() + pos + 14);
      if (format != 1 || bits != 16)
        throw ParseError("read_wav: only 16-bit PCM supported: " + path);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw ParseError("read_wav: data chunk before fmt");
      std::size_t count = std::min<std::size_t>(chunk, buf.size() - pos) / 2;
      wav.samples.reserve(count / static_cast<std::size_t>(channels));
      for (std::size_t s = 0; s < count; ++s) {
        if (s % static_cast<std::size_t>(channels) != 0) continue;  // channel 0 only
        auto raw = static_cast<std::int16_t>(detail::get_u16(buf.data() + pos + 2 * s));
        wav.samples.push_back(static_cast<double>(raw) / 32767.0);
      }
      return wav;
    }
    pos += chunk + (chunk & 1);
  }
  throw ParseError("read_wav: no data chunk in " + path);
}

}  // namespace emofuse
