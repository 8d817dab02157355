#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "emofuse/nn/layers.hpp"

namespace emofuse::nn {

// A plain layer sequence. Forward/backward carry an explicit tape so that
// inference on a shared trained network needs no mutable layer state.
class Network {
 public:
  template <class L, class... Args>
  L* add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  void init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
  }

  Tape make_tape() const {
    Tape t;
    t.slots.resize(layers_.size());
    return t;
  }

  Tensor forward(const Tensor& x, Tape& tape, bool training, Rng* rng) const {
    Tensor cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      cur = layers_[i]->forward(cur, tape.slots[i], training, rng);
    return cur;
  }

  // Inference forward through the first n layers only.
  Tensor forward_prefix(const Tensor& x, std::size_t n) const {
    Tensor cur = x;
    TapeSlot scratch;
    for (std::size_t i = 0; i < n && i < layers_.size(); ++i) {
      scratch.saved.clear();
      cur = layers_[i]->forward(cur, scratch, false, nullptr);
    }
    return cur;
  }

  Tensor infer(const Tensor& x) const { return forward_prefix(x, layers_.size()); }

  Tensor backward(const Tensor& gy, Tape& tape) {
    Tensor cur = gy;
    for (std::size_t i = layers_.size(); i-- > 0;)
      cur = layers_[i]->backward(cur, tape.slots[i]);
    return cur;
  }

  std::vector<Param*> params() {
    std::vector<Param*> all;
    for (auto& l : layers_)
      for (Param* p : l->params()) all.push_back(p);
    return all;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (Param* p : params()) n += p->value.size();
    return n;
  }

  void zero_grads() {
    for (Param* p : params()) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace emofuse::nn
