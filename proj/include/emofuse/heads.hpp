#pragma once

#include <array>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "emofuse/audio_prep.hpp"
#include "emofuse/checkpoint.hpp"
#include "emofuse/embedding.hpp"
#include "emofuse/encoders.hpp"
#include "emofuse/labels.hpp"
#include "emofuse/nn/train.hpp"
#include "emofuse/text_tokens.hpp"
#include "emofuse/version.hpp"

namespace emofuse {

namespace detail {

// Head stack shared by both modalities: pool the encoder sequence,
// layer-normalize (encoder feature scales vary wildly across providers),
// then the configured dense widths with ReLU and the 4-unit output. The
// embedding is the activation after the first dense's ReLU.
inline std::size_t build_head(nn::Network& head, std::size_t hidden,
                              const std::vector<int>& widths, int n_classes,
                              std::uint64_t seed) {
  head.add<nn::MeanPool>();
  head.add<nn::LayerNorm>(hidden, "head_ln");
  std::size_t feat = hidden;
  std::size_t embed_prefix = 0;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    head.add<nn::Dense>(feat, static_cast<std::size_t>(widths[k]),
                        "head" + std::to_string(k));
    head.add<nn::Relu>();
    feat = static_cast<std::size_t>(widths[k]);
    if (k == 0) embed_prefix = head.layer_count();
  }
  head.add<nn::Dense>(feat, static_cast<std::size_t>(n_classes), "head_out");
  Rng rng(seed);
  head.init(rng);
  return embed_prefix;
}

}  // namespace detail

// --------------------------------------------------------------- speech

struct SpeechModel {
  EncoderHandle handle;
  SpeechHeadConfig config;
  SpeechEncoder encoder;
  nn::Network head;
  std::size_t embed_prefix = 0;
  nlohmann::json train_meta = {{"epochs", 0}};
  // diagnostics: how many times the encoder ran (embedding-cache tests)
  std::size_t encoder_forward_count = 0;

  bool trained() const { return train_meta.value("epochs", 0) > 0; }
};

inline SpeechModel make_speech_model(const std::string& provider_id,
                                     const SpeechHeadConfig& config,
                                     bool frozen, std::uint64_t seed,
                                     const EncoderRegistry& registry = {}) {
  config.validate();
  SpeechModel m;
  m.config = config;
  m.encoder = resolve_speech_encoder(provider_id, registry);
  m.handle = {"speech", provider_id, frozen, m.encoder.architecture()};
  m.embed_prefix = detail::build_head(m.head, m.encoder.hidden(),
                                      config.head_widths, config.n_classes,
                                      mix_seed(seed, 0x4ead));
  return m;
}

inline nn::TrainStats train_speech_head(SpeechModel& model,
                                        const std::vector<PreparedAudio>& clips,
                                        const std::vector<int>& labels,
                                        nn::TrainOptions opt) {
  if (model.handle.modality != "speech")
    throw ConfigError("train_speech_head: encoder modality mismatch");
  if (opt.epochs <= 0) {
    return {};  // no-op contract: weights untouched
  }

  nn::TrainStats stats;
  if (model.handle.frozen) {
    // Frozen encoder: features are fixed, compute once and train the head.
    std::vector<nn::Tensor> features;
    features.reserve(clips.size());
    for (const auto& c : clips) {
      features.push_back(model.encoder.forward(c));
      ++model.encoder_forward_count;
    }
    stats = nn::train_classifier(model.head, features, labels, opt);
  } else {
    auto params = model.head.params();
    for (nn::Param* p : model.encoder.params()) params.push_back(p);
    nn::Tape enc_tape = model.encoder.net().make_tape();
    nn::Tape head_tape = model.head.make_tape();
    auto step = [&](std::size_t i, Rng& rng) {
      nn::Tensor x = model.encoder.input_tensor(clips[i]);
      nn::Tensor feats = model.encoder.net().forward(x, enc_tape, true, &rng);
      ++model.encoder_forward_count;
      nn::Tensor logits = model.head.forward(feats, head_tape, true, &rng);
      auto lr = nn::softmax_cross_entropy(logits, labels[i]);
      nn::Tensor gfeats = model.head.backward(lr.dlogits, head_tape);
      model.encoder.net().backward(gfeats, enc_tape);
      return lr.loss;
    };
    auto predict_fn = [&](std::size_t i) {
      ++model.encoder_forward_count;
      return nn::argmax_lowest(
          nn::softmax(model.head.infer(model.encoder.forward(clips[i]))));
    };
    stats = nn::train_loop(params, clips.size(), labels, opt, step, predict_fn);
  }
  model.train_meta["epochs"] =
      model.train_meta.value("epochs", 0) + stats.epochs_run;
  model.train_meta["seed"] = opt.seed;
  if (stats.epochs_run > 0) model.train_meta["final_loss"] = stats.final_loss;
  return stats;
}

inline nn::Tensor predict(SpeechModel& model, const PreparedAudio& clip) {
  ++model.encoder_forward_count;
  return nn::softmax(model.head.infer(model.encoder.forward(clip)));
}

// ----------------------------------------------------------------- text

struct TextModel {
  EncoderHandle handle;
  TextHeadConfig config;
  TextEncoder encoder;
  nn::Network head;
  std::size_t embed_prefix = 0;
  nlohmann::json train_meta = {{"epochs", 0}};
  std::size_t encoder_forward_count = 0;

  bool trained() const { return train_meta.value("epochs", 0) > 0; }

  TokenSequence tokenize_input(const std::string& transcript) const {
    return tokenize(transcript, config.max_seq_len, encoder.vocab_size());
  }
};

inline TextModel make_text_model(const std::string& provider_id,
                                 const TextHeadConfig& config, bool frozen,
                                 std::uint64_t seed,
                                 const EncoderRegistry& registry = {}) {
  config.validate();
  TextModel m;
  m.config = config;
  m.encoder = resolve_text_encoder(provider_id, registry);
  if (m.encoder.hidden() != static_cast<std::size_t>(config.embedding_dim))
    throw ConfigError("text head: embedding_dim differs from encoder hidden");
  m.handle = {"text", provider_id, frozen, m.encoder.architecture()};
  m.embed_prefix = detail::build_head(m.head, m.encoder.hidden(),
                                      config.head_widths, config.n_classes,
                                      mix_seed(seed, 0x7e47));
  return m;
}

inline nn::TrainStats train_text_head(TextModel& model,
                                      const std::vector<std::string>& transcripts,
                                      const std::vector<int>& labels,
                                      nn::TrainOptions opt) {
  if (model.handle.modality != "text")
    throw ConfigError("train_text_head: encoder modality mismatch");
  if (opt.epochs <= 0) return {};

  std::vector<TokenSequence> tokens;
  tokens.reserve(transcripts.size());
  for (const auto& t : transcripts) tokens.push_back(model.tokenize_input(t));

  nn::TrainStats stats;
  if (model.handle.frozen) {
    std::vector<nn::Tensor> features;
    features.reserve(tokens.size());
    for (const auto& seq : tokens) {
      features.push_back(model.encoder.forward(seq.ids));
      ++model.encoder_forward_count;
    }
    stats = nn::train_classifier(model.head, features, labels, opt);
  } else {
    auto params = model.head.params();
    for (nn::Param* p : model.encoder.params()) params.push_back(p);
    nn::Tape head_tape = model.head.make_tape();
    auto step = [&](std::size_t i, Rng& rng) {
      nn::Tensor feats = model.encoder.forward(tokens[i].ids);
      ++model.encoder_forward_count;
      nn::Tensor logits = model.head.forward(feats, head_tape, true, &rng);
      auto lr = nn::softmax_cross_entropy(logits, labels[i]);
      nn::Tensor gfeats = model.head.backward(lr.dlogits, head_tape);
      model.encoder.backward(tokens[i].ids, gfeats);
      return lr.loss;
    };
    auto predict_fn = [&](std::size_t i) {
      ++model.encoder_forward_count;
      return nn::argmax_lowest(
          nn::softmax(model.head.infer(model.encoder.forward(tokens[i].ids))));
    };
    stats = nn::train_loop(params, tokens.size(), labels, opt, step, predict_fn);
  }
  model.train_meta["epochs"] =
      model.train_meta.value("epochs", 0) + stats.epochs_run;
  model.train_meta["seed"] = opt.seed;
  if (stats.epochs_run > 0) model.train_meta["final_loss"] = stats.final_loss;
  return stats;
}

inline nn::Tensor predict(TextModel& model, const std::string& transcript) {
  auto seq = model.tokenize_input(transcript);
  ++model.encoder_forward_count;
  return nn::softmax(model.head.infer(model.encoder.forward(seq.ids)));
}

// --------------------------------------------------------- majority vote

// Most frequent label; ties break to the lowest label id.
inline EmotionLabel majority_vote(const std::vector<EmotionLabel>& votes) {
  if (votes.empty()) throw ValidationError("majority_vote: empty sequence");
  std::array<std::size_t, kNumClasses> counts = {0, 0, 0, 0};
  for (EmotionLabel v : votes) ++counts[static_cast<std::size_t>(label_id(v))];
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i)
    if (counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)])
      best = i;
  return label_from_id(best);
}

// ------------------------------------------------------------ embeddings

inline std::string model_fingerprint(SpeechModel& model) {
  std::uint64_t h = model.encoder.weights_fingerprint();
  for (const nn::Param* p : model.head.params())
    for (double v : p->value.data) {
      float f = static_cast<float>(v);
      h = fnv1a64(&f, sizeof(f), h);
    }
  return hex64(h);
}

inline std::string model_fingerprint(TextModel& model) {
  std::uint64_t h = model.encoder.weights_fingerprint();
  for (const nn::Param* p : model.head.params())
    for (double v : p->value.data) {
      float f = static_cast<float>(v);
      h = fnv1a64(&f, sizeof(f), h);
    }
  return hex64(h);
}

namespace detail {
inline EmbeddingVector activation_embedding(const nn::Tensor& act,
                                            const std::string& utterance_id,
                                            const std::string& modality,
                                            const std::string& checkpoint,
                                            bool untrained) {
  EmbeddingVector e;
  e.utterance_id = utterance_id;
  e.modality = modality;
  e.source_checkpoint = checkpoint;
  e.from_untrained_model = untrained;
  e.values.resize(act.size());
  for (std::size_t i = 0; i < act.size(); ++i)
    e.values[i] = static_cast<float>(act.data[i]);
  return e;
}

inline void cache_put_nonfatal(EmbeddingCache* cache, const EmbeddingVector& e) {
  if (!cache) return;
  try {
    cache->put(e);
  } catch (const Error& err) {
    // cache write failure: embedding still returned
    std::cerr << "warning: embedding cache write failed: " << err.what() << "\n";
  }
}
}  // namespace detail

inline EmbeddingVector extract_embedding(SpeechModel& model,
                                         const PreparedAudio& clip,
                                         const std::string& utterance_id,
                                         EmbeddingCache* cache = nullptr) {
  std::string ckpt = model_fingerprint(model);
  if (cache)
    if (auto hit = cache->get(utterance_id, "speech", ckpt)) return *hit;
  nn::Tensor feats = model.encoder.forward(clip);
  ++model.encoder_forward_count;
  nn::Tensor act = model.head.forward_prefix(feats, model.embed_prefix);
  auto e = detail::activation_embedding(act, utterance_id, "speech", ckpt,
                                        !model.trained());
  detail::cache_put_nonfatal(cache, e);
  return e;
}

inline EmbeddingVector extract_embedding(TextModel& model,
                                         const std::string& transcript,
                                         const std::string& utterance_id,
                                         EmbeddingCache* cache = nullptr) {
  std::string ckpt = model_fingerprint(model);
  if (cache)
    if (auto hit = cache->get(utterance_id, "text", ckpt)) return *hit;
  auto seq = model.tokenize_input(transcript);
  nn::Tensor feats = model.encoder.forward(seq.ids);
  ++model.encoder_forward_count;
  nn::Tensor act = model.head.forward_prefix(feats, model.embed_prefix);
  auto e = detail::activation_embedding(act, utterance_id, "text", ckpt,
                                        !model.trained());
  detail::cache_put_nonfatal(cache, e);
  return e;
}

// ------------------------------------------------------------ checkpoints

inline void save_checkpoint(SpeechModel& model, const std::string& path,
                            nlohmann::json run_meta = {}) {
  nlohmann::json header;
  header["kind"] = "speech_head";
  header["config"] = {{"max_samples", model.config.max_samples},
                      {"sample_rate_hz", model.config.sample_rate_hz},
                      {"head_widths", model.config.head_widths},
                      {"n_classes", model.config.n_classes},
                      {"optimizer", model.config.optimizer},
                      {"learning_rate", model.config.learning_rate},
                      {"batch_size", model.config.batch_size}};
  header["encoder"] = {{"provider_id", model.handle.provider_id},
                       {"frozen", model.handle.frozen},
                       {"architecture", model.handle.architecture}};
  header["label_schema"] = kLabelNames;
  header["train_meta"] = model.train_meta;
  header["toolkit_version"] = kToolkitVersion;
  if (!run_meta.is_null()) header["meta"] = run_meta;
  auto params = model.encoder.params();
  for (nn::Param* p : model.head.params()) params.push_back(p);
  write_checkpoint(path, header, params);
}

inline SpeechModel load_speech_checkpoint(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  if (ck.header.value("kind", "") != "speech_head")
    throw ValidationError("speech checkpoint kind mismatch in " + path);
  SpeechHeadConfig config;
  const auto& c = ck.header.at("config");
  config.max_samples = c.value("max_samples", config.max_samples);
  config.sample_rate_hz = c.value("sample_rate_hz", config.sample_rate_hz);
  config.head_widths = c.at("head_widths").get<std::vector<int>>();
  config.optimizer = c.value("optimizer", config.optimizer);
  config.learning_rate = c.value("learning_rate", config.learning_rate);
  config.batch_size = c.value("batch_size", config.batch_size);

  SpeechModel m;
  m.config = config;
  m.encoder = SpeechEncoder::from_architecture(
      ck.header.at("encoder").at("architecture"), 0);
  m.handle = {"speech", ck.header.at("encoder").value("provider_id", ""),
              ck.header.at("encoder").value("frozen", false),
              m.encoder.architecture()};
  m.embed_prefix = detail::build_head(m.head, m.encoder.hidden(),
                                      config.head_widths, config.n_classes, 0);
  auto params = m.encoder.params();
  for (nn::Param* p : m.head.params()) params.push_back(p);
  load_params(ck, params);
  m.train_meta = ck.header.value("train_meta", nlohmann::json::object());
  return m;
}

inline void save_checkpoint(TextModel& model, const std::string& path,
                            nlohmann::json run_meta = {}) {
  nlohmann::json header;
  header["kind"] = "text_head";
  header["config"] = {{"embedding_dim", model.config.embedding_dim},
                      {"max_seq_len", model.config.max_seq_len},
                      {"head_widths", model.config.head_widths},
                      {"n_classes", model.config.n_classes},
                      {"optimizer", model.config.optimizer},
                      {"learning_rate", model.config.learning_rate},
                      {"batch_size", model.config.batch_size}};
  header["encoder"] = {{"provider_id", model.handle.provider_id},
                       {"frozen", model.handle.frozen},
                       {"architecture", model.handle.architecture}};
  header["label_schema"] = kLabelNames;
  header["train_meta"] = model.train_meta;
  header["toolkit_version"] = kToolkitVersion;
  if (!run_meta.is_null()) header["meta"] = run_meta;
  auto params = model.encoder.params();
  for (nn::Param* p : model.head.params()) params.push_back(p);
  write_checkpoint(path, header, params);
}

inline TextModel load_text_checkpoint(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  if (ck.header.value("kind", "") != "text_head")
    throw ValidationError("text checkpoint kind mismatch in " + path);
  TextHeadConfig config;
  const auto& c = ck.header.at("config");
  config.embedding_dim = c.value("embedding_dim", config.embedding_dim);
  config.max_seq_len = c.value("max_seq_len", config.max_seq_len);
  config.head_widths = c.at("head_widths").get<std::vector<int>>();
  config.optimizer = c.value("optimizer", config.optimizer);
  config.learning_rate = c.value("learning_rate", config.learning_rate);
  config.batch_size = c.value("batch_size", config.batch_size);

  TextModel m;
  m.config = config;
  m.encoder = TextEncoder::from_architecture(
      ck.header.at("encoder").at("architecture"), 0);
  m.handle = {"text", ck.header.at("encoder").value("provider_id", ""),
              ck.header.at("encoder").value("frozen", false),
              m.encoder.architecture()};
  m.embed_prefix = detail::build_head(m.head, m.encoder.hidden(),
                                      config.head_widths, config.n_classes, 0);
  auto params = m.encoder.params();
  for (nn::Param* p : m.head.params()) params.push_back(p);
  load_params(ck, params);
  m.train_meta = ck.header.value("train_meta", nlohmann::json::object());
  return m;
}

}  // namespace emofuse
