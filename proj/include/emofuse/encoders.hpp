#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "emofuse/audio_prep.hpp"
#include "emofuse/checkpoint.hpp"
#include "emofuse/hash.hpp"
#include "emofuse/nn/network.hpp"

namespace emofuse {

// A pretrained-encoder reference: the provider_id names a checkpoint; the
// architecture metadata is echoed from whatever was loaded, never hard-coded
// here. frozen controls whether fine-tuning reaches encoder weights.
struct EncoderHandle {
  std::string modality;  // "speech" | "text"
  std::string provider_id;
  bool frozen = false;
  nlohmann::json architecture;  // echoed from the checkpoint
};

// Built-in desk-scale provider ids. They stand in for the multi-hundred-MB
// production checkpoints with tiny deterministic random weights behind the
// identical interface (same hidden width, same call shape), so the test
// suite never downloads anything.
inline constexpr const char* kTinySpeechProvider = "tiny-speech-v1";
inline constexpr const char* kTinyTextProvider = "tiny-text-v1";

// Maps provider ids to local checkpoint container paths for non-builtin
// encoders (converted production checkpoints).
struct EncoderRegistry {
  std::map<std::string, std::string> provider_paths;

  std::string resolve(const std::string& provider_id) const {
    auto it = provider_paths.find(provider_id);
    if (it == provider_paths.end())
      throw MissingArtifactError(
          "encoder provider \"" + provider_id +
          "\" is not a builtin and has no registry entry; add "
          "encoders.<provider> = <checkpoint path> to the config");
    return it->second;
  }
};

// ------------------------------------------------------------------ speech

// Feature encoder over raw waveform: strided Conv1D blocks with GELU, then
// optional self-attention context blocks, yielding (frames, hidden). Only
// the valid prefix of the prepared audio is convolved; the zero tail is
// padding and carries no content.
class SpeechEncoder {
 public:
  static SpeechEncoder from_architecture(const nlohmann::json& arch,
                                         std::uint64_t seed) {
    SpeechEncoder enc;
    enc.arch_ = arch;
    enc.hidden_ = arch.at("hidden").get<std::size_t>();
    std::size_t channels = 1;
    int idx = 0;
    for (const auto& block : arch.at("conv_blocks")) {
      auto out_ch = block.at("channels").get<std::size_t>();
      enc.net_.add<nn::Conv1D>(block.at("kernel").get<std::size_t>(),
                               block.at("stride").get<std::size_t>(), channels,
                               out_ch, "enc_conv" + std::to_string(idx));
      enc.net_.add<nn::Gelu>();
      channels = out_ch;
      ++idx;
    }
    if (channels != enc.hidden_)
      throw ConfigError("speech encoder: last conv channels must equal hidden");
    for (int b = 0; b < arch.value("context_blocks", 0); ++b)
      enc.net_.add<nn::SelfAttention>(enc.hidden_,
                                      "enc_ctx" + std::to_string(b));
    Rng rng(seed);
    enc.net_.init(rng);
    return enc;
  }

  static nlohmann::json tiny_architecture() {
    return {{"hidden", 768},
            {"conv_blocks",
             {{{"kernel", 160}, {"stride", 160}, {"channels", 16}},
              {{"kernel", 4}, {"stride", 4}, {"channels", 32}},
              {{"kernel", 2}, {"stride", 2}, {"channels", 768}}}},
            {"context_blocks", 0}};
  }

  static SpeechEncoder tiny(const std::string& provider_id = kTinySpeechProvider) {
    return from_architecture(tiny_architecture(), mix_seed(fnv1a64(provider_id), 1));
  }

  std::size_t hidden() const { return hidden_; }
  const nlohmann::json& architecture() const { return arch_; }
  nn::Network& net() { return net_; }
  const nn::Network& net() const { return net_; }
  std::vector<nn::Param*> params() { return net_.params(); }

  nn::Tensor input_tensor(const PreparedAudio& audio) const {
    const std::size_t n = std::max<std::size_t>(audio.valid_samples, 1);
    nn::Tensor x({n, 1});
    for (std::size_t i = 0; i < n; ++i) x.at(i, 0) = audio.samples[i];
    return x;
  }

  nn::Tensor forward(const PreparedAudio& audio) const {
    return net_.infer(input_tensor(audio));
  }

  std::uint64_t weights_fingerprint() {
    std::uint64_t h = fnv1a64(arch_.dump());
    for (const nn::Param* p : net_.params())
      for (double v : p->value.data) {
        float f = static_cast<float>(v);
        h = fnv1a64(&f, sizeof(f), h);
      }
    return h;
  }

 private:
  nn::Network net_;
  std::size_t hidden_ = 0;
  nlohmann::json arch_;
};

// ------------------------------------------------------------------- text

// Token-embedding encoder: ids -> (T, hidden) lookups from a trainable
// table. Context mixing is left to the head's pooling at desk scale.
class TextEncoder {
 public:
  static TextEncoder from_architecture(const nlohmann::json& arch,
                                       std::uint64_t seed) {
    TextEncoder enc;
    enc.arch_ = arch;
    enc.hidden_ = arch.at("hidden").get<std::size_t>();
    enc.vocab_ = arch.at("vocab_size").get<std::size_t>();
    enc.embed_ = std::make_unique<nn::Param>(
        "enc_embed", std::vector<std::size_t>{enc.vocab_, enc.hidden_});
    Rng rng(seed);
    for (auto& v : enc.embed_->value.data) v = rng.normal(0.0, 0.5);
    // padding row stays zero
    for (std::size_t j = 0; j < enc.hidden_; ++j) enc.embed_->value.at(0, j) = 0.0;
    return enc;
  }

  static nlohmann::json tiny_architecture() {
    return {{"hidden", 768}, {"vocab_size", 1024}};
  }

  static TextEncoder tiny(const std::string& provider_id = kTinyTextProvider) {
    return from_architecture(tiny_architecture(), mix_seed(fnv1a64(provider_id), 2));
  }

  std::size_t hidden() const { return hidden_; }
  std::size_t vocab_size() const { return vocab_; }
  const nlohmann::json& architecture() const { return arch_; }
  std::vector<nn::Param*> params() { return {embed_.get()}; }

  nn::Tensor forward(const std::vector<int>& ids) const {
    if (ids.empty()) throw ValidationError("text encoder: empty id sequence");
    nn::Tensor out({ids.size(), hidden_});
    for (std::size_t t = 0; t < ids.size(); ++t) {
      auto id = static_cast<std::size_t>(ids[t]);
      if (id >= vocab_) throw ValidationError("text encoder: id out of vocab");
      for (std::size_t j = 0; j < hidden_; ++j)
        out.at(t, j) = embed_->value.at(id, j);
    }
    return out;
  }

  void backward(const std::vector<int>& ids, const nn::Tensor& gy) {
    for (std::size_t t = 0; t < ids.size(); ++t) {
      auto id = static_cast<std::size_t>(ids[t]);
      for (std::size_t j = 0; j < hidden_; ++j)
        embed_->grad.at(id, j) += gy.at(t, j);
    }
  }

  std::uint64_t weights_fingerprint() const {
    std::uint64_t h = fnv1a64(arch_.dump());
    for (double v : embed_->value.data) {
      float f = static_cast<float>(v);
      h = fnv1a64(&f, sizeof(f), h);
    }
    return h;
  }

 private:
  std::unique_ptr<nn::Param> embed_;
  std::size_t hidden_ = 0, vocab_ = 0;
  nlohmann::json arch_;
};

// Standalone encoder containers, the format converted production
// checkpoints arrive in.
inline void save_encoder_checkpoint(SpeechEncoder& enc, const std::string& path) {
  nlohmann::json header;
  header["kind"] = "speech_encoder";
  header["config"] = enc.architecture();
  write_checkpoint(path, header, enc.params());
}

inline void save_encoder_checkpoint(TextEncoder& enc, const std::string& path) {
  nlohmann::json header;
  header["kind"] = "text_encoder";
  header["config"] = enc.architecture();
  write_checkpoint(path, header, enc.params());
}

// Resolution: builtin tiny providers are generated; anything else loads a
// converted checkpoint container through the registry.
inline SpeechEncoder resolve_speech_encoder(const std::string& provider_id,
                                            const EncoderRegistry& registry = {}) {
  if (provider_id == kTinySpeechProvider) return SpeechEncoder::tiny(provider_id);
  CheckpointData ck = read_checkpoint(registry.resolve(provider_id));
  if (ck.header.value("kind", "") != "speech_encoder")
    throw ValidationError("encoder checkpoint kind mismatch for " + provider_id);
  auto enc = SpeechEncoder::from_architecture(ck.header.at("config"), 0);
  load_params(ck, enc.params());
  return enc;
}

inline TextEncoder resolve_text_encoder(const std::string& provider_id,
                                        const EncoderRegistry& registry = {}) {
  if (provider_id == kTinyTextProvider) return TextEncoder::tiny(provider_id);
  CheckpointData ck = read_checkpoint(registry.resolve(provider_id));
  if (ck.header.value("kind", "") != "text_encoder")
    throw ValidationError("encoder checkpoint kind mismatch for " + provider_id);
  auto enc = TextEncoder::from_architecture(ck.header.at("config"), 0);
  load_params(ck, enc.params());
  return enc;
}

}  // namespace emofuse
