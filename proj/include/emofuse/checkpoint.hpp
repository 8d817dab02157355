#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "emofuse/error.hpp"
#include "emofuse/nn/network.hpp"

namespace emofuse {

// Self-describing checkpoint container:
//   magic, u32 header length, JSON header, float32 blobs in header order.
// The header carries kind, config, label schema, train_meta and run meta;
// the params list pins name + shape for every blob.

inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'F', 'C', 'K', 'P', 'T', '1'};

struct CheckpointData {
  nlohmann::json header;
  std::vector<std::pair<std::string, std::vector<float>>> arrays;

  const std::vector<float>& array(const std::string& name) const {
    for (const auto& [n, v] : arrays)
      if (n == name) return v;
    throw MissingArtifactError("checkpoint: no array named " + name);
  }
};

inline void write_checkpoint(const std::string& path, nlohmann::json header,
                             const std::vector<nn::Param*>& params) {
  nlohmann::json plist = nlohmann::json::array();
  for (const nn::Param* p : params)
    plist.push_back({{"name", p->name}, {"shape", p->value.shape}});
  header["params"] = plist;
  std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, 8);
  auto len = static_cast<std::uint32_t>(h.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const nn::Param* p : params) {
    std::vector<float> blob(p->value.size());
    for (std::size_t i = 0; i < blob.size(); ++i)
      blob[i] = static_cast<float>(p->value.data[i]);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
  }
  if (!out) throw IoError("write_checkpoint: short write to " + path);
}

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("read_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError("read_checkpoint: bad magic in " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string h(len, '\0');
  in.read(h.data(), len);
  if (!in) throw ParseError("read_checkpoint: truncated header in " + path);

  CheckpointData ck;
  ck.header = nlohmann::json::parse(h);
  for (const auto& p : ck.header.at("params")) {
    auto shape = p.at("shape").get<std::vector<std::size_t>>();
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<float> blob(n);
    in.read(reinterpret_cast<char*>(blob.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw ParseError("read_checkpoint: truncated blob in " + path);
    ck.arrays.emplace_back(p.at("name").get<std::string>(), std::move(blob));
  }
  return ck;
}

// Copies checkpoint arrays into live params; names and shapes must agree.
inline void load_params(const CheckpointData& ck,
                        const std::vector<nn::Param*>& params) {
  if (ck.arrays.size() != params.size())
    throw ValidationError("checkpoint: parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Param* p = params[k];
    const auto& [name, blob] = ck.arrays[k];
    if (name != p->name)
      throw ValidationError("checkpoint: parameter order mismatch at " + name +
                            " vs " + p->name);
    if (blob.size() != p->value.size())
      throw ShapeError("checkpoint: size mismatch for " + name);
    for (std::size_t i = 0; i < blob.size(); ++i)
      p->value.data[i] = static_cast<double>(blob[i]);
  }
}

}  // namespace emofuse
