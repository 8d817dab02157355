#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "emofuse/dataset.hpp"
#include "emofuse/error.hpp"

namespace emofuse::mocap {

struct Frame {
  double timestamp_s = 0.0;
  std::vector<double> values;
};

// Raw per-utterance (or per-dialog) marker stream for one sub-mode.
// Timestamps must be non-decreasing; every frame carries feature_dim values.
// NaN entries mark dropped markers and are legal until imputation.
struct SubModeStream {
  SubMode sub_mode = SubMode::facial;
  int feature_dim = 0;
  std::vector<Frame> frames;

  void validate() const {
    if (feature_dim != sub_mode_dim(sub_mode))
      throw ValidationError(std::string("stream feature_dim ") +
                            std::to_string(feature_dim) + " does not match " +
                            sub_mode_name(sub_mode) + " width " +
                            std::to_string(sub_mode_dim(sub_mode)));
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& f : frames) {
      if (static_cast<int>(f.values.size()) != feature_dim)
        throw ValidationError("stream frame width differs from feature_dim");
      if (f.timestamp_s < prev)
        throw ValidationError("stream timestamps are not non-decreasing");
      prev = f.timestamp_s;
    }
  }
};

namespace detail {
inline bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  const char* p = line.c_str();
  while (*p) {
    while (*p == ' ' || *p == '\t' || *p == ',') ++p;
    if (!*p) break;
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p) return false;
    out.push_back(v);
    p = end;
  }
  return !out.empty();
}
}  // namespace detail

// Stream file: delimited text, first column timestamp seconds, remaining
// columns features, token "nan" for missing markers. Lines that do not start
// with a number (headers) are skipped.
inline SubModeStream read_stream(const std::string& path, SubMode mode) {
  std::ifstream in(path);
  if (!in) throw IoError("read_stream: cannot open " + path);
  SubModeStream s;
  s.sub_mode = mode;
  s.feature_dim = sub_mode_dim(mode);

  std::string line;
  std::vector<double> row;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!detail::parse_row(line, row)) continue;  // header / comment line
    if (static_cast<int>(row.size()) != s.feature_dim + 1)
      throw ParseError("read_stream: " + path + ":" + std::to_string(line_no) +
                       ": expected " + std::to_string(s.feature_dim + 1) +
                       " columns, got " + std::to_string(row.size()));
    Frame f;
    f.timestamp_s = row[0];
    f.values.assign(row.begin() + 1, row.end());
    s.frames.push_back(std::move(f));
  }
  s.validate();
  return s;
}

inline void write_stream(const SubModeStream& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_stream: cannot open " + path);
  out.precision(9);
  for (const auto& f : s.frames) {
    out << f.timestamp_s;
    for (double v : f.values) {
      out << ' ';
      if (std::isnan(v))
        out << "nan";
      else
        out << v;
    }
    out << '\n';
  }
}

// Per-column linear interpolation of NaN gaps between the nearest valid
// neighbors in time; leading/trailing gaps hold the nearest valid value;
// an all-NaN column becomes zeros. Total: the result never contains NaN.
inline SubModeStream impute_missing_markers(const SubModeStream& stream) {
  stream.validate();
  SubModeStream out = stream;
  const std::size_t n = out.frames.size();
  if (n == 0) return out;

  for (int col = 0; col < out.feature_dim; ++col) {
    // Indices of frames with a valid value in this column.
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isnan(stream.frames[i].values[static_cast<std::size_t>(col)]))
        valid.push_back(i);

    if (valid.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        out.frames[i].values[static_cast<std::size_t>(col)] = 0.0;
      continue;
    }

    std::size_t next_valid = 0;  // index into `valid`
    for (std::size_t i = 0; i < n; ++i) {
      auto& cell = out.frames[i].values[static_cast<std::size_t>(col)];
      if (!std::isnan(cell)) {
        if (next_valid < valid.size() && valid[next_valid] == i) ++next_valid;
        continue;
      }
      if (next_valid == 0) {
        cell = stream.frames[valid.front()].values[static_cast<std::size_t>(col)];
      } else if (next_valid >= valid.size()) {
        cell = stream.frames[valid.back()].values[static_cast<std::size_t>(col)];
      } else {
        std::size_t lo = valid[next_valid - 1];
        std::size_t hi = valid[next_valid];
        double t0 = stream.frames[lo].timestamp_s;
        double t1 = stream.frames[hi].timestamp_s;
        double v0 = stream.frames[lo].values[static_cast<std::size_t>(col)];
        double v1 = stream.frames[hi].values[static_cast<std::size_t>(col)];
        double t = stream.frames[i].timestamp_s;
        cell = (t1 > t0) ? v0 + (v1 - v0) * (t - t0) / (t1 - t0) : v0;
      }
    }
  }
  return out;
}

}  // namespace emofuse::mocap
