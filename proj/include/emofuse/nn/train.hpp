#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <string>
#include <vector>

#include "emofuse/error.hpp"
#include "emofuse/nn/loss.hpp"
#include "emofuse/nn/network.hpp"
#include "emofuse/nn/optimizer.hpp"

namespace emofuse::nn {

struct TrainOptions {
  int epochs = 10;
  int batch_size = 4;
  std::string optimizer = "adam";
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  // Stop once the epoch's train accuracy reaches this value (<0: never).
  double early_stop_train_acc = -1.0;
  std::string log_path;  // CSV "epoch,loss,train_accuracy" when nonempty
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainStats {
  int epochs_run = 0;
  double final_loss = 0.0;
  double final_train_accuracy = 0.0;
  std::vector<EpochStats> history;
};

// Generic single-thread training loop shared by every trainable module.
// `step` runs forward+backward for one sample, accumulating gradients into
// `params`, and returns the sample loss; `predict` returns the inference
// label for the train-accuracy sweep. Deterministic given the seed and
// sample order.
inline TrainStats train_loop(
    const std::vector<Param*>& params, std::size_t n_samples,
    const std::vector<int>& labels, const TrainOptions& opt,
    const std::function<double(std::size_t, Rng&)>& step,
    const std::function<int(std::size_t)>& predict) {
  if (n_samples == 0 || labels.size() != n_samples)
    throw ValidationError("train: empty or mismatched data");
  if (opt.batch_size < 1) throw ConfigError("train: batch_size >= 1");

  auto optimizer = make_optimizer(opt.optimizer, opt.learning_rate);
  Rng shuffle_rng = Rng(opt.seed).fork(0x5481);
  Rng dropout_rng = Rng(opt.seed).fork(0xd409);

  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path, std::ios::binary);
    if (!log) throw IoError("train: cannot open log " + opt.log_path);
    log << "epoch,loss,train_accuracy\n";
  }

  TrainStats stats;
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(opt.batch_size)) {
      std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(opt.batch_size));
      for (Param* p : params) p->zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        double loss = step(order[k], dropout_rng);
        if (!std::isfinite(loss))
          throw TrainingError("NaN loss at epoch " + std::to_string(epoch) +
                              ", batch " +
                              std::to_string(begin / static_cast<std::size_t>(
                                                         opt.batch_size)));
        loss_sum += loss;
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (Param* p : params)
        for (auto& g : p->grad.data) g *= inv;
      optimizer->step(params);
    }

    EpochStats es;
    es.epoch = epoch;
    es.loss = loss_sum / static_cast<double>(n_samples);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < n_samples; ++k)
      if (predict(k) == labels[k]) ++correct;
    es.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(n_samples);

    if (log)
      log << es.epoch << ',' << std::setprecision(17) << es.loss << ','
          << es.train_accuracy << '\n';
    stats.history.push_back(es);
    stats.epochs_run = epoch + 1;
    stats.final_loss = es.loss;
    stats.final_train_accuracy = es.train_accuracy;
    if (opt.early_stop_train_acc >= 0.0 &&
        es.train_accuracy >= opt.early_stop_train_acc)
      break;
  }
  return stats;
}

// Plain classifier training over a single network.
inline TrainStats train_classifier(Network& net,
                                   const std::vector<Tensor>& inputs,
                                   const std::vector<int>& labels,
                                   const TrainOptions& opt) {
  if (inputs.empty() || inputs.size() != labels.size())
    throw ValidationError("train_classifier: empty or mismatched data");
  Tape tape = net.make_tape();
  auto step = [&](std::size_t i, Rng& rng) {
    Tensor logits = net.forward(inputs[i], tape, true, &rng);
    LossResult lr = softmax_cross_entropy(logits, labels[i]);
    net.backward(lr.dlogits, tape);
    return lr.loss;
  };
  auto predict = [&](std::size_t i) {
    return argmax_lowest(softmax(net.infer(inputs[i])));
  };
  return train_loop(net.params(), inputs.size(), labels, opt, step, predict);
}

}  // namespace emofuse::nn
