#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "emofuse/heads.hpp"
#include "emofuse/synthetic.hpp"
#include "support/tmpdir.hpp"

using namespace emofuse;
using testutil::TempDir;

namespace {

struct SpeechSet {
  std::vector<PreparedAudio> clips;
  std::vector<int> labels;
};

SpeechSet tone_clips(int n_per_class, std::uint64_t seed) {
  SpeechSet out;
  Rng rng(seed);
  for (int i = 0; i < n_per_class; ++i)
    for (int c = 0; c < kNumClasses; ++c) {
      Rng rec = rng.fork(static_cast<std::uint64_t>(i * 4 + c));
      auto wav = synth::make_audio(c, 1.0 + 0.2 * (i % 3), 16000, rec);
      out.clips.push_back(prepare_audio(wav.samples, wav.sample_rate_hz));
      out.labels.push_back(c);
    }
  return out;
}

struct TextSet {
  std::vector<std::string> transcripts;
  std::vector<int> labels;
};

TextSet templated_sentences(int n_per_class, std::uint64_t seed) {
  TextSet out;
  Rng rng(seed);
  for (int i = 0; i < n_per_class; ++i)
    for (int c = 0; c < kNumClasses; ++c) {
      Rng rec = rng.fork(static_cast<std::uint64_t>(i * 4 + c));
      out.transcripts.push_back(synth::make_transcript(c, rec));
      out.labels.push_back(c);
    }
  return out;
}

}  // namespace

TEST_CASE("tiny providers resolve with architecture echoed from the checkpoint") {
  auto speech = resolve_speech_encoder(kTinySpeechProvider);
  REQUIRE(speech.hidden() == 768);
  REQUIRE(speech.architecture().contains("conv_blocks"));

  auto text = resolve_text_encoder(kTinyTextProvider);
  REQUIRE(text.hidden() == 768);
  REQUIRE(text.architecture().at("vocab_size").get<std::size_t>() >= 2);
}

TEST_CASE("unknown provider without a registry entry is actionable") {
  REQUIRE_THROWS_WITH(resolve_speech_encoder("wav2vec2-base"),
                      Catch::Matchers::ContainsSubstring("registry"));
}

TEST_CASE("registry resolves converted encoder containers from disk") {
  TempDir dir("encreg");
  auto enc = SpeechEncoder::tiny();
  save_encoder_checkpoint(enc, dir.file("speech.ckpt"));
  EncoderRegistry registry;
  registry.provider_paths["converted-speech"] = dir.file("speech.ckpt");
  auto loaded = resolve_speech_encoder("converted-speech", registry);
  REQUIRE(loaded.hidden() == enc.hidden());

  PreparedAudio clip;
  clip.samples.assign(246000, 0.0);
  for (std::size_t i = 0; i < 8000; ++i) clip.samples[i] = std::sin(0.05 * i);
  clip.valid_samples = 8000;
  auto a = enc.forward(clip);
  auto b = loaded.forward(clip);
  REQUIRE(a.shape == b.shape);
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(b.data[i] == Catch::Approx(a.data[i]).margin(1e-5));

  // wrong kind is rejected
  EncoderRegistry wrong;
  wrong.provider_paths["converted-text"] = dir.file("speech.ckpt");
  REQUIRE_THROWS_AS(resolve_text_encoder("converted-text", wrong), ValidationError);
}

TEST_CASE("tokenizer truncates to max_seq_len and flags empties") {
  std::string lots;
  for (int i = 0; i < 200; ++i) lots += "word" + std::to_string(i) + " ";
  auto seq = tokenize(lots, 124, 1024);
  REQUIRE(seq.ids.size() == 124);
  REQUIRE(seq.truncated);
  REQUIRE_FALSE(seq.empty_input);

  auto empty = tokenize("", 124, 1024);
  REQUIRE(empty.ids == std::vector<int>{0});
  REQUIRE(empty.empty_input);

  auto punct = tokenize("?!...", 124, 1024);
  REQUIRE(punct.empty_input);

  // deterministic and case-insensitive
  REQUIRE(tokenize("Hello World", 124, 1024).ids ==
          tokenize("hello world", 124, 1024).ids);
}

TEST_CASE("majority vote: strict majority, ties to lowest id, oracle match") {
  using L = EmotionLabel;
  REQUIRE(majority_vote({L::angry, L::angry, L::sad}) == L::angry);
  REQUIRE(majority_vote({L::neutral, L::sad}) == L::neutral);  // tie -> lowest
  REQUIRE_THROWS_AS(majority_vote({}), ValidationError);

  Rng rng(33);
  std::vector<L> votes;
  for (int i = 0; i < 101; ++i)
    votes.push_back(label_from_id(rng.uniform_int(0, 3)));
  std::array<int, 4> counts = {0, 0, 0, 0};
  for (L v : votes) ++counts[static_cast<std::size_t>(label_id(v))];
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)]) best = i;
  REQUIRE(label_id(majority_vote(votes)) == best);
}

TEST_CASE("speech head overfits 16 tone clips with a frozen encoder") {
  auto data = tone_clips(4, 5);
  SpeechHeadConfig cfg;
  auto model = make_speech_model(kTinySpeechProvider, cfg, /*frozen=*/true, 7);

  auto enc_before = model.encoder.params()[0]->value.data;
  nn::TrainOptions opt;
  opt.epochs = 100;
  opt.batch_size = cfg.batch_size;
  opt.optimizer = cfg.optimizer;  // sgd per the recipe
  opt.learning_rate = 0.02;       // desk-scale rate
  opt.seed = 11;
  opt.early_stop_train_acc = 1.0;
  auto stats = train_speech_head(model, data.clips, data.labels, opt);
  INFO("epochs " << stats.epochs_run << " loss " << stats.final_loss);
  REQUIRE(stats.final_train_accuracy == 1.0);
  // frozen contract: gradients only reached the head
  REQUIRE(model.encoder.params()[0]->value.data == enc_before);
}

TEST_CASE("trainable speech encoder receives gradient after one step") {
  auto data = tone_clips(1, 6);
  auto model = make_speech_model(kTinySpeechProvider, {}, /*frozen=*/false, 7);
  auto enc_before = model.encoder.params()[0]->value.data;
  nn::TrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 4;
  opt.learning_rate = 0.01;
  opt.optimizer = "sgd";
  train_speech_head(model, data.clips, data.labels, opt);
  REQUIRE(model.encoder.params()[0]->value.data != enc_before);
}

TEST_CASE("speech: epochs=0 leaves the head unchanged") {
  auto data = tone_clips(1, 6);
  auto model = make_speech_model(kTinySpeechProvider, {}, true, 7);
  auto before = model.head.params()[0]->value.data;
  nn::TrainOptions opt;
  opt.epochs = 0;
  auto stats = train_speech_head(model, data.clips, data.labels, opt);
  REQUIRE(stats.epochs_run == 0);
  REQUIRE(model.head.params()[0]->value.data == before);
}

TEST_CASE("text head overfits 16 templated sentences") {
  auto data = templated_sentences(4, 9);
  TextHeadConfig cfg;
  auto model = make_text_model(kTinyTextProvider, cfg, /*frozen=*/true, 3);
  nn::TrainOptions opt;
  opt.epochs = 50;
  opt.batch_size = cfg.batch_size;
  opt.optimizer = cfg.optimizer;  // adam per the recipe
  opt.learning_rate = 1e-3;
  opt.seed = 2;
  opt.early_stop_train_acc = 1.0;
  auto stats = train_text_head(model, data.transcripts, data.labels, opt);
  INFO("epochs " << stats.epochs_run);
  REQUIRE(stats.final_train_accuracy == 1.0);
}

TEST_CASE("empty transcript still predicts, flagged degenerate") {
  auto model = make_text_model(kTinyTextProvider, {}, true, 3);
  auto seq = model.tokenize_input("");
  REQUIRE(seq.empty_input);
  auto p = predict(model, "");
  double sum = 0.0;
  for (double v : p.data) sum += v;
  REQUIRE(sum == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("predictions are simplex points and deterministic") {
  auto data = tone_clips(1, 13);
  auto model = make_speech_model(kTinySpeechProvider, {}, true, 8);
  auto p1 = predict(model, data.clips[0]);
  auto p2 = predict(model, data.clips[0]);
  REQUIRE(p1.data == p2.data);
  double sum = 0.0;
  for (double v : p1.data) {
    REQUIRE(v >= 0.0);
    sum += v;
  }
  REQUIRE(sum == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("embedding: width echo, cache round trip, cache hit skips recompute") {
  TempDir dir("embcache");
  EmbeddingCache cache(dir.file("cache"));
  auto data = templated_sentences(1, 21);
  TextHeadConfig cfg;
  auto model = make_text_model(kTinyTextProvider, cfg, true, 3);

  auto e1 = extract_embedding(model, data.transcripts[0], "utt0", &cache);
  REQUIRE(e1.dim() == static_cast<std::size_t>(cfg.head_widths[0]));  // 256
  REQUIRE(e1.modality == "text");
  REQUIRE(e1.from_untrained_model);

  auto counted = model.encoder_forward_count;
  auto e2 = extract_embedding(model, data.transcripts[0], "utt0", &cache);
  REQUIRE(model.encoder_forward_count == counted);  // cache hit, no recompute
  REQUIRE(e2.values == e1.values);                  // bit-exact round trip

  auto stored = cache.get("utt0", "text", e1.source_checkpoint);
  REQUIRE(stored.has_value());
  REQUIRE(stored->values == e1.values);
}

TEST_CASE("cache write failure still returns the embedding with a warning") {
  auto data = templated_sentences(1, 22);
  auto model = make_text_model(kTinyTextProvider, {}, true, 3);
  EmbeddingCache broken("/proc/emofuse-no-such-root/cache");
  auto e = extract_embedding(model, data.transcripts[0], "utt0", &broken);
  REQUIRE(e.dim() > 0);
}

TEST_CASE("speech checkpoint round trips through the container") {
  TempDir dir("speechckpt");
  auto data = tone_clips(1, 30);
  auto model = make_speech_model(kTinySpeechProvider, {}, true, 7);
  nn::TrainOptions opt;
  opt.epochs = 2;
  opt.learning_rate = 0.01;
  opt.optimizer = "sgd";
  train_speech_head(model, data.clips, data.labels, opt);
  save_checkpoint(model, dir.file("s.ckpt"));

  auto loaded = load_speech_checkpoint(dir.file("s.ckpt"));
  REQUIRE(loaded.train_meta.value("epochs", 0) == 2);
  REQUIRE(loaded.handle.provider_id == kTinySpeechProvider);
  auto p0 = predict(model, data.clips[0]);
  auto p1 = predict(loaded, data.clips[0]);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(p1.data[i] == Catch::Approx(p0.data[i]).margin(1e-4));
}

TEST_CASE("text checkpoint round trips through the container") {
  TempDir dir("textckpt");
  auto data = templated_sentences(1, 31);
  auto model = make_text_model(kTinyTextProvider, {}, true, 5);
  nn::TrainOptions opt;
  opt.epochs = 2;
  opt.learning_rate = 1e-3;
  train_text_head(model, data.transcripts, data.labels, opt);
  save_checkpoint(model, dir.file("t.ckpt"));

  auto loaded = load_text_checkpoint(dir.file("t.ckpt"));
  REQUIRE(loaded.train_meta.value("epochs", 0) == 2);
  auto p0 = predict(model, data.transcripts[0]);
  auto p1 = predict(loaded, data.transcripts[0]);
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(p1.data[i] == Catch::Approx(p0.data[i]).margin(1e-4));
}
