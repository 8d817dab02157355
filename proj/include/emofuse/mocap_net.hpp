#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "emofuse/checkpoint.hpp"
#include "emofuse/embedding.hpp"
#include "emofuse/labels.hpp"
#include "emofuse/mocap/pipeline.hpp"
#include "emofuse/nn/network.hpp"
#include "emofuse/nn/train.hpp"
#include "emofuse/version.hpp"

namespace emofuse::mocap_net {

struct Conv2DSpec {
  int kernel_h = 3;
  int kernel_w = 3;
  int n_filters = 128;
  int stride = 1;            // only 1 is supported, pooling does the shrinking
  std::string padding = "same";
  std::string activation = "relu";
};

// The three architectures: variant "conv" is Model 1, "conv_lstm" Model 2,
// "conv_lstm_attn" Model 3. Production is Model 3 over the combined
// (200, 189) input: five 3x3 conv blocks of 128 filters, 128-unit LSTM,
// self-attention, two dense layers, softmax.
struct MoCapNetConfig {
  std::string variant = "conv_lstm_attn";
  std::vector<Conv2DSpec> conv_blocks = std::vector<Conv2DSpec>(5);
  double dropout_rate = 0.2;
  int lstm_units = 128;
  std::string attention = "self_attention";  // or "none"
  std::vector<int> dense_widths = {256, 64};
  int n_classes = kNumClasses;
  std::string optimizer = "adam";
  double learning_rate = 1e-5;

  void validate() const {
    if (variant != "conv" && variant != "conv_lstm" && variant != "conv_lstm_attn")
      throw ConfigError("mocap_net: unknown variant " + variant);
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ConfigError("mocap_net: dropout_rate must be in [0, 1)");
    if (variant != "conv" && lstm_units <= 0)
      throw ConfigError("mocap_net: lstm_units must be positive with an LSTM");
    if (attention == "self_attention" && variant != "conv_lstm_attn")
      throw ConfigError("mocap_net: attention without an LSTM stage");
    if (variant == "conv_lstm_attn" && attention != "self_attention")
      throw ConfigError("mocap_net: variant conv_lstm_attn requires self_attention");
    if (conv_blocks.empty()) throw ConfigError("mocap_net: need conv blocks");
    if (dense_widths.empty()) throw ConfigError("mocap_net: need dense widths");
    if (n_classes != kNumClasses)
      throw ConfigError("mocap_net: n_classes fixed at 4");
    for (const auto& b : conv_blocks) {
      if (b.kernel_h < 1 || b.kernel_w < 1) throw ConfigError("mocap_net: kernel dims >= 1");
      if (b.stride != 1) throw ConfigError("mocap_net: only stride 1 supported");
      if (b.padding != "same") throw ConfigError("mocap_net: only same padding supported");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& c : conv_blocks)
      b.push_back({{"kernel_h", c.kernel_h},
                   {"kernel_w", c.kernel_w},
                   {"n_filters", c.n_filters},
                   {"stride", c.stride},
                   {"padding", c.padding},
                   {"activation", c.activation}});
    return {{"variant", variant},
            {"conv_blocks", b},
            {"dropout_rate", dropout_rate},
            {"lstm_units", lstm_units},
            {"attention", attention},
            {"dense_widths", dense_widths},
            {"n_classes", n_classes},
            {"optimizer", optimizer},
            {"learning_rate", learning_rate}};
  }

  static MoCapNetConfig from_json(const nlohmann::json& j) {
    MoCapNetConfig c;
    c.variant = j.value("variant", c.variant);
    if (j.contains("conv_blocks")) {
      c.conv_blocks.clear();
      for (const auto& b : j["conv_blocks"]) {
        Conv2DSpec s;
        s.kernel_h = b.value("kernel_h", 3);
        s.kernel_w = b.value("kernel_w", 3);
        s.n_filters = b.value("n_filters", 128);
        s.stride = b.value("stride", 1);
        s.padding = b.value("padding", "same");
        s.activation = b.value("activation", "relu");
        c.conv_blocks.push_back(s);
      }
    }
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.lstm_units = j.value("lstm_units", c.lstm_units);
    c.attention = j.value("attention", c.attention);
    if (j.contains("dense_widths"))
      c.dense_widths = j["dense_widths"].get<std::vector<int>>();
    c.optimizer = j.value("optimizer", c.optimizer);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    return c;
  }
};

// Desk-scale configuration: same Model 3 topology, small widths, a learning
// rate that converges on separable synthetic data in minutes on a CPU.
inline MoCapNetConfig test_scale_config(const std::string& variant = "conv_lstm_attn") {
  MoCapNetConfig c;
  c.variant = variant;
  c.attention = (variant == "conv_lstm_attn") ? "self_attention" : "none";
  c.conv_blocks = std::vector<Conv2DSpec>(2);
  for (auto& b : c.conv_blocks) b.n_filters = 6;
  c.lstm_units = 16;
  c.dense_widths = {32, 16};
  c.learning_rate = 3e-3;
  return c;
}

struct MoCapModel {
  MoCapNetConfig config;
  std::size_t rows = 0, cols = 0;
  nn::Network net;
  std::size_t embed_prefix = 0;  // layers up to the first dense's ReLU
  nlohmann::json train_meta;     // {epochs, seed, final_loss}

  bool trained() const { return train_meta.value("epochs", 0) > 0; }
};

// Builds the layer stack: [conv -> relu -> maxpool -> dropout] x N, then
// reshape to a sequence, optional LSTM and self-attention, flatten and the
// dense head. Parameters are deterministic given (config, seed).
inline std::unique_ptr<MoCapModel> build_model(const MoCapNetConfig& config,
                                               std::size_t rows, std::size_t cols,
                                               std::uint64_t seed) {
  config.validate();
  if (rows != mocap::kNumPartitions)
    throw ShapeError("mocap_net: input rows must be " +
                     std::to_string(mocap::kNumPartitions));
  if (cols != 189 && cols != 165 && cols != 18 && cols != 6)
    throw ShapeError("mocap_net: input cols must be one of 165/18/6/189");

  auto model = std::make_unique<MoCapModel>();
  model->config = config;
  model->rows = rows;
  model->cols = cols;

  std::size_t h = rows, w = cols, c = 1;
  int idx = 0;
  for (const auto& block : config.conv_blocks) {
    auto filters = static_cast<std::size_t>(block.n_filters);
    model->net.add<nn::Conv2D>(static_cast<std::size_t>(block.kernel_h),
                               static_cast<std::size_t>(block.kernel_w), c,
                               filters, "conv" + std::to_string(idx));
    model->net.add<nn::Relu>();
    if (h / 2 == 0 || w / 2 == 0)
      throw ConfigError("mocap_net: too many conv blocks for input " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    model->net.add<nn::MaxPool2D>();
    h /= 2;
    w /= 2;
    c = filters;
    if (config.dropout_rate > 0.0) model->net.add<nn::Dropout>(config.dropout_rate);
    ++idx;
  }

  std::size_t feat;
  if (config.variant == "conv") {
    model->net.add<nn::Flatten>();
    feat = h * w * c;
  } else {
    model->net.add<nn::SeqReshape>();
    auto units = static_cast<std::size_t>(config.lstm_units);
    model->net.add<nn::Lstm>(w * c, units);
    if (config.variant == "conv_lstm_attn")
      model->net.add<nn::SelfAttention>(units);
    model->net.add<nn::Flatten>();
    feat = h * units;
  }

  for (std::size_t k = 0; k < config.dense_widths.size(); ++k) {
    auto width = static_cast<std::size_t>(config.dense_widths[k]);
    model->net.add<nn::Dense>(feat, width, "dense" + std::to_string(k));
    model->net.add<nn::Relu>();
    feat = width;
    if (k == 0) model->embed_prefix = model->net.layer_count();
  }
  model->net.add<nn::Dense>(feat, static_cast<std::size_t>(config.n_classes), "output");

  Rng rng(seed);
  model->net.init(rng);
  model->train_meta = {{"epochs", 0}, {"seed", seed}, {"final_loss", nullptr}};
  return model;
}

inline nn::Tensor to_input(const MoCapModel& model, const nn::Tensor& values) {
  if (values.rank() != 2 || values.dim(0) != model.rows || values.dim(1) != model.cols)
    throw ShapeError("mocap_net: input shape " + values.shape_str() +
                     " does not match model (" + std::to_string(model.rows) +
                     ", " + std::to_string(model.cols) + ")");
  return values.reshaped({model.rows, model.cols, 1});
}

inline nn::Tensor predict(const MoCapModel& model, const nn::Tensor& values) {
  return nn::softmax(model.net.infer(to_input(model, values)));
}

inline int predict_label(const MoCapModel& model, const nn::Tensor& values) {
  return nn::argmax_lowest(predict(model, values));
}

inline nn::TrainStats train(MoCapModel& model,
                            const std::vector<nn::Tensor>& tensors,
                            const std::vector<int>& labels,
                            nn::TrainOptions opt) {
  if (opt.optimizer.empty()) opt.optimizer = model.config.optimizer;
  std::vector<nn::Tensor> inputs;
  inputs.reserve(tensors.size());
  for (const auto& t : tensors) inputs.push_back(to_input(model, t));
  nn::TrainStats stats;
  if (opt.epochs > 0) stats = nn::train_classifier(model.net, inputs, labels, opt);
  model.train_meta["epochs"] =
      model.train_meta.value("epochs", 0) + stats.epochs_run;
  model.train_meta["seed"] = opt.seed;
  if (stats.epochs_run > 0) model.train_meta["final_loss"] = stats.final_loss;
  return stats;
}

inline EmbeddingVector extract_embedding(const MoCapModel& model,
                                         const nn::Tensor& values,
                                         const std::string& utterance_id,
                                         const std::string& source_checkpoint) {
  nn::Tensor act = model.net.forward_prefix(to_input(model, values),
                                            model.embed_prefix);
  EmbeddingVector e;
  e.utterance_id = utterance_id;
  e.modality = "mocap";
  e.source_checkpoint = source_checkpoint;
  e.from_untrained_model = !model.trained();
  e.values.resize(act.size());
  for (std::size_t i = 0; i < act.size(); ++i)
    e.values[i] = static_cast<float>(act.data[i]);
  return e;
}

inline void save_checkpoint(MoCapModel& model, const std::string& path,
                            nlohmann::json run_meta = {}) {
  nlohmann::json header;
  header["kind"] = "mocap_net";
  header["config"] = model.config.to_json();
  header["input_shape"] = {model.rows, model.cols};
  header["label_schema"] = kLabelNames;
  header["train_meta"] = model.train_meta;
  header["toolkit_version"] = kToolkitVersion;
  if (!run_meta.is_null()) header["meta"] = run_meta;
  write_checkpoint(path, header, model.net.params());
}

inline std::unique_ptr<MoCapModel> load_checkpoint(const std::string& path) {
  CheckpointData ck = read_checkpoint(path);
  if (ck.header.value("kind", "") != "mocap_net")
    throw ValidationError("mocap_net: checkpoint kind mismatch in " + path);
  auto config = MoCapNetConfig::from_json(ck.header.at("config"));
  auto shape = ck.header.at("input_shape").get<std::vector<std::size_t>>();
  auto model = build_model(config, shape.at(0), shape.at(1), 0);
  load_params(ck, model->net.params());
  model->train_meta = ck.header.value("train_meta", nlohmann::json::object());
  return model;
}

}  // namespace emofuse::mocap_net
