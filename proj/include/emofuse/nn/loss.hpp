#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "emofuse/error.hpp"
#include "emofuse/nn/tensor.hpp"

namespace emofuse::nn {

inline Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  double maxv = *std::max_element(p.data.begin(), p.data.end());
  double sum = 0.0;
  for (auto& v : p.data) {
    v = std::exp(v - maxv);
    sum += v;
  }
  for (auto& v : p.data) v /= sum;
  return p;
}

// Predicted class: argmax with lowest-index tie-break.
inline int argmax_lowest(const Tensor& probs) {
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs.data[i] > probs.data[best]) best = static_cast<int>(i);
  return best;
}

struct LossResult {
  double loss = 0.0;
  Tensor dlogits;
  Tensor probs;
};

// Sparse categorical cross-entropy over softmax(logits).
inline LossResult softmax_cross_entropy(const Tensor& logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw ValidationError("softmax_cross_entropy: label out of range");
  LossResult r;
  r.probs = softmax(logits);
  double p = std::max(r.probs.data[static_cast<std::size_t>(label)], 1e-300);
  r.loss = -std::log(p);
  r.dlogits = r.probs;
  r.dlogits.data[static_cast<std::size_t>(label)] -= 1.0;
  return r;
}

}  // namespace emofuse::nn
