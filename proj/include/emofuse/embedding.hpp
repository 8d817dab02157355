#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emofuse/error.hpp"

namespace emofuse {

// Modality-tagged fixed-length vector from a trained sub-module's
// penultimate layer. Values are float32: that is the cache payload width,
// and keeping them float end-to-end makes round-trips bit-exact.
struct EmbeddingVector {
  std::string utterance_id;
  std::string modality;  // speech | text | mocap
  std::vector<float> values;
  std::string source_checkpoint;  // checkpoint hash or provider id
  bool from_untrained_model = false;

  std::size_t dim() const { return values.size(); }

  bool all_finite() const {
    for (float v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline constexpr char kEmbeddingMagic[8] = {'E', 'M', 'F', 'E', 'M', 'B', '0', '1'};

// Directory of binary records keyed by (utterance_id, modality,
// checkpoint hash): one file per key, JSON header + float32 payload.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::string root) : root_(std::move(root)) {}

  const std::string& root() const { return root_; }

  std::string path_for(const std::string& utterance_id,
                       const std::string& modality,
                       const std::string& checkpoint) const {
    namespace fs = std::filesystem;
    return (fs::path(root_) / modality / checkpoint / (utterance_id + ".emb"))
        .string();
  }

  bool contains(const std::string& utterance_id, const std::string& modality,
                const std::string& checkpoint) const {
    return std::filesystem::exists(path_for(utterance_id, modality, checkpoint));
  }

  void put(const EmbeddingVector& e) {
    namespace fs = std::filesystem;
    std::string path = path_for(e.utterance_id, e.modality, e.source_checkpoint);
    std::error_code ec;
    fs::create_directories(fs::path(path).parent_path(), ec);
    if (ec)
      throw IoError("embedding cache: cannot create " + path + ": " + ec.message());

    nlohmann::json header;
    header["utterance_id"] = e.utterance_id;
    header["modality"] = e.modality;
    header["dim"] = e.values.size();
    header["source_checkpoint"] = e.source_checkpoint;
    header["from_untrained_model"] = e.from_untrained_model;
    std::string h = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("embedding cache: cannot open " + path);
    out.write(kEmbeddingMagic, 8);
    auto len = static_cast<std::uint32_t>(h.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(e.values.size() * sizeof(float)));
    if (!out) throw IoError("embedding cache: short write to " + path);
  }

  std::optional<EmbeddingVector> get(const std::string& utterance_id,
                                     const std::string& modality,
                                     const std::string& checkpoint) const {
    std::string path = path_for(utterance_id, modality, checkpoint);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kEmbeddingMagic, 8) != 0)
      throw ParseError("embedding cache: bad magic in " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string h(len, '\0');
    in.read(h.data(), len);
    if (!in) throw ParseError("embedding cache: truncated header in " + path);
    nlohmann::json header = nlohmann::json::parse(h);

    EmbeddingVector e;
    e.utterance_id = header.at("utterance_id").get<std::string>();
    e.modality = header.at("modality").get<std::string>();
    e.source_checkpoint = header.at("source_checkpoint").get<std::string>();
    e.from_untrained_model = header.value("from_untrained_model", false);
    e.values.resize(header.at("dim").get<std::size_t>());
    in.read(reinterpret_cast<char*>(e.values.data()),
            static_cast<std::streamsize>(e.values.size() * sizeof(float)));
    if (!in) throw ParseError("embedding cache: truncated payload in " + path);
    return e;
  }

 private:
  std::string root_;
};

}  // namespace emofuse
