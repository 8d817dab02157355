#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emofuse/checkpoint.hpp"
#include "emofuse/embedding.hpp"
#include "emofuse/error.hpp"
#include "emofuse/labels.hpp"
#include "emofuse/nn/train.hpp"
#include "emofuse/version.hpp"

namespace emofuse::fusion {

inline constexpr std::array<const char*, 3> kModalityOrder = {"speech", "text",
                                                              "mocap"};

// Nonempty subset of {speech, text, mocap} in canonical order. Pairs and
// the triple feed fusion heads; singletons are handled by unimodal predict
// but still concatenate (identity) for the span tests.
struct ModalitySubset {
  std::array<bool, 3> members = {false, false, false};

  static ModalitySubset from_names(const std::vector<std::string>& names) {
    ModalitySubset s;
    for (const auto& n : names) {
      bool known = false;
      for (std::size_t i = 0; i < kModalityOrder.size(); ++i)
        if (n == kModalityOrder[i]) {
          s.members[i] = true;
          known = true;
        }
      if (!known) throw ConfigError("modality subset: unknown modality " + n);
    }
    if (s.size() == 0) throw ConfigError("modality subset: empty");
    return s;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < 3; ++i)
      if (members[i]) out.emplace_back(kModalityOrder[i]);
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (bool b : members) n += b ? 1 : 0;
    return n;
  }

  std::string to_string() const {
    std::string out;
    for (const auto& n : names()) {
      if (!out.empty()) out += "+";
      out += n;
    }
    return out;
  }

  bool operator==(const ModalitySubset& o) const { return members == o.members; }
};

inline const std::vector<ModalitySubset>& all_fusion_subsets() {
  static const std::vector<ModalitySubset> kSubsets = {
      ModalitySubset::from_names({"speech", "text"}),
      ModalitySubset::from_names({"speech", "mocap"}),
      ModalitySubset::from_names({"text", "mocap"}),
      ModalitySubset::from_names({"speech", "text", "mocap"})};
  return kSubsets;
}

struct MEFSpan {
  std::string modality;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

// The concatenated multimodal emotion feature vector for one utterance.
struct MEFVector {
  std::string utterance_id;
  ModalitySubset subset;
  std::vector<float> values;
  std::vector<MEFSpan> layout;

  std::size_t dim() const { return values.size(); }
};

// Concatenates the subset's embeddings in canonical order. A missing member
// is an explicit error; there is no silent zero-fill at fusion level.
// zscore_per_modality optionally standardizes each modality's span of this
// vector (mean 0, unit variance) before concatenation; default off.
inline MEFVector concat_mef(const std::map<std::string, EmbeddingVector>& embeddings,
                            const ModalitySubset& subset,
                            bool zscore_per_modality = false) {
  MEFVector out;
  out.subset = subset;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!subset.members[i]) continue;
    const char* name = kModalityOrder[i];
    auto it = embeddings.find(name);
    if (it == embeddings.end())
      throw MissingModalityError(std::string("concat_mef: missing modality ") +
                                 name);
    const EmbeddingVector& e = it->second;
    if (!e.all_finite())
      throw ValidationError(std::string("concat_mef: non-finite values in ") +
                            name + " embedding");
    if (out.utterance_id.empty()) out.utterance_id = e.utterance_id;

    std::size_t begin = out.values.size();
    if (zscore_per_modality && e.values.size() > 1) {
      double mean = 0.0;
      for (float v : e.values) mean += v;
      mean /= static_cast<double>(e.values.size());
      double var = 0.0;
      for (float v : e.values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(e.values.size());
      double inv = 1.0 / std::sqrt(var + 1e-8);
      for (float v : e.values)
        out.values.push_back(static_cast<float>((v - mean) * inv));
    } else {
      out.values.insert(out.values.end(), e.values.begin(), e.values.end());
    }
    out.layout.push_back({name, begin, out.values.size()});
  }
  return out;
}

// One hidden dense layer then the 4-unit softmax output.
struct FusionHeadConfig {
  std::size_t input_dim = 0;
  int dense_width = 256;
  int n_classes = kNumClasses;
  std::string loss = "sparse_categorical_cross_entropy";
  std::string optimizer = "adam";
  double learning_rate = 1e-5;
};

struct FusionModel {
  FusionHeadConfig config;
  ModalitySubset subset;
  nn::Network net;
  nlohmann::json train_meta = {{"epochs", 0}};

  bool trained() const { return train_meta.value("epochs", 0) > 0; }
};

inline FusionModel make_fusion_head(const ModalitySubset& subset,
                                    std::size_t input_dim, std::uint64_t seed,
                                    int dense_width = 256) {
  if (subset.size() < 2)
    throw ConfigError("fusion head: subsets of size 2 or 3 only");
  if (input_dim == 0) throw ConfigError("fusion head: input_dim must be positive");
  FusionModel m;
  m.subset = subset;
  m.config.input_dim = input_dim;
  m.config.dense_width = dense_width;
  m.net.add<nn::Dense>(input_dim, static_cast<std::size_t>(dense_width), "fuse0");
  m.net.add<nn::Relu>();
  m.net.add<nn::Dense>(static_cast<std::size_t>(dense_width),
                       static_cast<std::size_t>(kNumClasses), "fuse_out");
  Rng rng(seed);
  m.net.init(rng);
  return m;
}

inline nn::Tensor mef_tensor(const FusionModel& model, const MEFVector& mef) {
  if (mef.dim() != model.config.input_dim)
    throw ShapeError("fusion: MEF length " + std::to_string(mef.dim()) +
                     " does not match head input_dim " +
                     std::to_string(model.config.input_dim));
  nn::Tensor t({mef.dim()});
  for (std::size_t i = 0; i < mef.dim(); ++i)
    t.data[i] = static_cast<double>(mef.values[i]);
  return t;
}

// Trains only the head; unimodal sub-module weights are not in the
// trainable set (callers verify checkpoint hashes stay put).
inline nn::TrainStats train_fusion_head(FusionModel& model,
                                        const std::vector<MEFVector>& mefs,
                                        const std::vector<int>& labels,
                                        const nn::TrainOptions& opt) {
  if (mefs.empty() || mefs.size() != labels.size())
    throw ValidationError("train_fusion_head: empty or mismatched data");
  std::vector<nn::Tensor> inputs;
  inputs.reserve(mefs.size());
  for (const auto& m : mefs) {
    if (!(m.subset == model.subset))
      throw ValidationError("train_fusion_head: mixed subsets in data (" +
                            m.subset.to_string() + " vs " +
                            model.subset.to_string() + ")");
    inputs.push_back(mef_tensor(model, m));
  }
  nn::TrainStats stats;
  if (opt.epochs > 0)
    stats = nn::train_classifier(model.net, inputs, labels, opt);
  model.train_meta["epochs"] =
      model.train_meta.value("epochs", 0) + stats.epochs_run;
  model.train_meta["seed"] = opt.seed;
  if (stats.epochs_run > 0) model.train_meta["final_loss"] = stats.final_loss;
  return stats;
}

inline nn::Tensor predict_fused(const FusionModel& model, const MEFVector& mef) {
  return nn::softmax(model.net.infer(mef_tensor(model, mef)));
}

inline void save_checkpoint(FusionModel& model, const std::string& path,
                            nlohmann::json run_meta = {}) {
  nlohmann::json header;
  header["kind"] = "fusion_head";
  header["config"] = {{"input_dim", model.config.input_dim},
                      {"dense_width", model.config.dense_width},
                      {"n_classes", model.config.n_classes},
                      {"loss", model.config.loss},
                      {"optimizer", model.config.optimizer},
                      {"learning_rate", model.config.learning_rate}};
  header["subset"] = model.subset.names();
  header["label_schema"] = kLabelNames;
  header["train_meta"] = model.train_meta;
  header["toolkit_version"] = kToolkitVersion;
  if (!run_meta.is_null()) header["meta"] = run_meta;
  write_checkpoint(path, header, model.net.params());
}

inline FusionModel load_fusion_checkpoint(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  if (ck.header.value("kind", "") != "fusion_head")
    throw ValidationError("fusion checkpoint kind mismatch in " + path);
  auto subset = ModalitySubset::from_names(
      ck.header.at("subset").get<std::vector<std::string>>());
  const auto& c = ck.header.at("config");
  auto model = make_fusion_head(subset, c.at("input_dim").get<std::size_t>(), 0,
                                c.value("dense_width", 256));
  load_params(ck, model.net.params());
  model.train_meta = ck.header.value("train_meta", nlohmann::json::object());
  return model;
}

}  // namespace emofuse::fusion
