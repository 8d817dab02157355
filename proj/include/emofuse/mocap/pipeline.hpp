#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "emofuse/error.hpp"
#include "emofuse/mocap/stream.hpp"
#include "emofuse/nn/tensor.hpp"

namespace emofuse::mocap {

inline constexpr std::size_t kNumPartitions = 200;
inline constexpr std::size_t kCombinedDim = 189;  // 165 + 18 + 6

struct FeatureSpan {
  std::string sub_mode;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

// Partition-averaged feature matrix: (200, d) for one sub-mode, (200, 189)
// combined. `imputed` marks tensors where a whole stream/sub-mode was absent
// and zeros were substituted.
struct MoCapTensor {
  nn::Tensor values;  // (kNumPartitions, d)
  std::vector<FeatureSpan> layout;
  bool imputed = false;

  std::size_t cols() const { return values.shape.size() == 2 ? values.shape[1] : 0; }
};

// Splits [start, end] into 200 contiguous equal-duration bins, averages each
// bin's frames column-wise. A frame at t == end lands in the last bin. Empty
// bins forward-fill from the nearest earlier nonempty bin; leading empties
// backward-fill from the first nonempty one; a stream with no frames in the
// window yields zeros and sets `imputed`.
inline MoCapTensor partition_average(const SubModeStream& stream,
                                     double start_time_s, double end_time_s) {
  if (!(end_time_s > start_time_s))
    throw ValidationError("partition_average: end_time_s must exceed start");
  stream.validate();

  const std::size_t d = static_cast<std::size_t>(stream.feature_dim);
  MoCapTensor out;
  out.values = nn::Tensor({kNumPartitions, d});
  out.layout = {{sub_mode_name(stream.sub_mode), 0, d}};

  const double duration = end_time_s - start_time_s;
  std::vector<double> sums(kNumPartitions * d, 0.0);
  std::vector<std::size_t> counts(kNumPartitions, 0);

  for (const auto& f : stream.frames) {
    if (f.timestamp_s < start_time_s || f.timestamp_s > end_time_s) continue;
    auto bin = static_cast<std::size_t>(
        (f.timestamp_s - start_time_s) / duration * kNumPartitions);
    if (bin >= kNumPartitions) bin = kNumPartitions - 1;
    for (std::size_t j = 0; j < d; ++j) sums[bin * d + j] += f.values[j];
    ++counts[bin];
  }

  std::size_t first_nonempty = kNumPartitions;
  for (std::size_t k = 0; k < kNumPartitions; ++k) {
    if (counts[k] == 0) continue;
    first_nonempty = k;
    break;
  }
  if (first_nonempty == kNumPartitions) {
    out.imputed = true;  // nothing in the window, all-zeros tensor
    return out;
  }

  for (std::size_t k = 0; k < kNumPartitions; ++k) {
    if (counts[k] > 0) {
      for (std::size_t j = 0; j < d; ++j)
        out.values.at(k, j) = sums[k * d + j] / static_cast<double>(counts[k]);
    } else if (k < first_nonempty) {
      // leading empty bins take the first nonempty bin's average
      std::size_t src = first_nonempty;
      for (std::size_t j = 0; j < d; ++j)
        out.values.at(k, j) =
            sums[src * d + j] / static_cast<double>(counts[src]);
    } else {
      for (std::size_t j = 0; j < d; ++j)
        out.values.at(k, j) = out.values.at(k - 1, j);
    }
  }
  return out;
}

// Column-wise concatenation in the fixed order facial|hand|head.
inline MoCapTensor combine_sub_modes(const MoCapTensor& facial,
                                     const MoCapTensor& hand,
                                     const MoCapTensor& head) {
  const MoCapTensor* parts[3] = {&facial, &hand, &head};
  for (int i = 0; i < 3; ++i) {
    const auto& t = parts[i]->values;
    auto want = static_cast<std::size_t>(kSubModeDims[static_cast<std::size_t>(i)]);
    if (t.rank() != 2 || t.dim(0) != kNumPartitions || t.dim(1) != want)
      throw ShapeError(std::string("combine_sub_modes: ") + kSubModeNames[static_cast<std::size_t>(i)] +
                       " tensor has shape " + t.shape_str() + ", expected (" +
                       std::to_string(kNumPartitions) + ", " +
                       std::to_string(want) + ")");
  }

  MoCapTensor out;
  out.values = nn::Tensor({kNumPartitions, kCombinedDim});
  out.imputed = facial.imputed || hand.imputed || head.imputed;
  std::size_t offset = 0;
  for (int i = 0; i < 3; ++i) {
    const auto& t = parts[i]->values;
    const std::size_t w = t.dim(1);
    for (std::size_t r = 0; r < kNumPartitions; ++r)
      for (std::size_t j = 0; j < w; ++j)
        out.values.at(r, offset + j) = t.at(r, j);
    out.layout.push_back({kSubModeNames[static_cast<std::size_t>(i)], offset, offset + w});
    offset += w;
  }
  return out;
}

// Zero tensor standing in for an absent sub-mode; flagged imputed so the
// flag propagates through combine_sub_modes.
inline MoCapTensor zero_sub_mode(SubMode mode) {
  MoCapTensor t;
  t.values = nn::Tensor({kNumPartitions, static_cast<std::size_t>(sub_mode_dim(mode))});
  t.layout = {{sub_mode_name(mode), 0, static_cast<std::size_t>(sub_mode_dim(mode))}};
  t.imputed = true;
  return t;
}

// ---- processed-tensor cache -------------------------------------------
// Binary file per utterance: magic, JSON header {utterance_id, shape,
// layout, imputed}, then row-major float32 payload.

inline constexpr char kTensorCacheMagic[8] = {'E', 'M', 'F', 'M',
                                              'C', 'T', '0', '1'};

inline void write_tensor_cache(const MoCapTensor& t,
                               const std::string& utterance_id,
                               const std::string& path) {
  json header;
  header["utterance_id"] = utterance_id;
  header["shape"] = t.values.shape;
  header["imputed"] = t.imputed;
  json spans = json::array();
  for (const auto& s : t.layout)
    spans.push_back({{"sub_mode", s.sub_mode}, {"begin", s.begin}, {"end", s.end}});
  header["layout"] = spans;
  std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_tensor_cache: cannot open " + path);
  out.write(kTensorCacheMagic, 8);
  auto h_len = static_cast<std::uint32_t>(h.size());
  out.write(reinterpret_cast<const char*>(&h_len), 4);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  std::vector<float> payload(t.values.size());
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<float>(t.values.at(i));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("write_tensor_cache: short write to " + path);
}

inline MoCapTensor read_tensor_cache(const std::string& path,
                                     std::string* utterance_id = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_tensor_cache: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kTensorCacheMagic, 8) != 0)
    throw ParseError("read_tensor_cache: bad magic in " + path);
  std::uint32_t h_len = 0;
  in.read(reinterpret_cast<char*>(&h_len), 4);
  std::string h(h_len, '\0');
  in.read(h.data(), h_len);
  if (!in) throw ParseError("read_tensor_cache: truncated header in " + path);
  json header = json::parse(h);

  MoCapTensor t;
  t.values = nn::Tensor(header.at("shape").get<std::vector<std::size_t>>());
  t.imputed = header.value("imputed", false);
  for (const auto& s : header.value("layout", json::array()))
    t.layout.push_back({s.at("sub_mode").get<std::string>(),
                        s.at("begin").get<std::size_t>(),
                        s.at("end").get<std::size_t>()});
  if (utterance_id) *utterance_id = header.value("utterance_id", "");

  std::vector<float> payload(t.values.size());
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!in) throw ParseError("read_tensor_cache: truncated payload in " + path);
  for (std::size_t i = 0; i < payload.size(); ++i)
    t.values.at(i) = static_cast<double>(payload[i]);
  return t;
}

// Full per-utterance pipeline: window each present sub-mode stream, impute
// dropped markers, partition-average, and concatenate. Absent sub-modes
// become zero blocks and flag the result imputed.
inline MoCapTensor utterance_tensor(const DatasetManifest& manifest,
                                    const UtteranceRecord& rec) {
  MoCapTensor parts[3];
  for (int i = 0; i < 3; ++i) {
    auto mode = static_cast<SubMode>(i);
    const auto& ref = rec.mocap_refs.by_mode(mode);
    if (!ref) {
      parts[i] = zero_sub_mode(mode);
      continue;
    }
    SubModeStream s = read_stream(manifest.resolve(*ref), mode);
    s = impute_missing_markers(s);
    parts[i] = partition_average(s, rec.start_time_s, rec.end_time_s);
  }
  return combine_sub_modes(parts[0], parts[1], parts[2]);
}

}  // namespace emofuse::mocap
