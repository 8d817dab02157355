#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "emofuse/error.hpp"
#include "emofuse/nn/layers.hpp"

namespace emofuse::nn {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<Param*>& params) = 0;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(const std::vector<Param*>& params) override {
    for (Param* p : params)
      for (std::size_t i = 0; i < p->value.size(); ++i)
        p->value.data[i] -= lr_ * p->grad.data[i];
  }

 private:
  double lr_;
};

// Adam with the default exponential decay rates of the moment estimates.
class Adam : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params) override {
    if (m_.empty()) {
      for (Param* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    if (m_.size() != params.size())
      throw ConfigError("adam: parameter set changed between steps");
    ++t_;
    const double corr1 = 1.0 - std::pow(b1_, t_);
    const double corr2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param* p = params[k];
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        double g = p->grad.data[i];
        m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g;
        v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g * g;
        double mhat = m_[k][i] / corr1;
        double vhat = v_[k][i] / corr2;
        p->value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

inline std::unique_ptr<Optimizer> make_optimizer(const std::string& kind,
                                                 double lr) {
  if (kind == "adam") return std::make_unique<Adam>(lr);
  if (kind == "sgd") return std::make_unique<Sgd>(lr);
  throw ConfigError("unknown optimizer: " + kind);
}

}  // namespace emofuse::nn
