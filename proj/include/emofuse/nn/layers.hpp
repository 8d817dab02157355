#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "emofuse/error.hpp"
#include "emofuse/nn/tensor.hpp"
#include "emofuse/rng.hpp"

namespace emofuse::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  explicit Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Activations a layer saves during forward for use in backward. Tapes are
// per-call, so a trained network is safe to share read-only across threads.
struct TapeSlot {
  std::vector<Tensor> saved;
};

struct Tape {
  std::vector<TapeSlot> slots;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual void init(Rng&) {}
  // `training` enables dropout; `rng` is only consulted then.
  virtual Tensor forward(const Tensor& x, TapeSlot& tape, bool training,
                         Rng* rng) const = 0;
  // Accumulates parameter gradients, returns gradient w.r.t. the input.
  virtual Tensor backward(const Tensor& gy, const TapeSlot& tape) = 0;
  virtual std::vector<Param*> params() { return {}; }
};

namespace init {
inline void glorot_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out,
                           Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.data) v = rng.uniform(-limit, limit);
}
}  // namespace init

// ---------------------------------------------------------------- Dense
class Dense : public Layer {
 public:
  Dense(std::size_t in_dim, std::size_t out_dim, std::string name = "dense")
      : in_(in_dim),
        out_(out_dim),
        w_(name + "/W", {out_dim, in_dim}),
        b_(name + "/b", {out_dim}) {}

  const char* kind() const override { return "dense"; }

  void init(Rng& rng) override { init::glorot_uniform(w_.value, in_, out_, rng); }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    if (x.size() != in_)
      throw ShapeError("dense: input size " + std::to_string(x.size()) +
                       ", expected " + std::to_string(in_));
    Tensor y({out_});
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = b_.value.at(o);
      const double* wrow = &w_.value.data[o * in_];
      for (std::size_t i = 0; i < in_; ++i) acc += wrow[i] * x.data[i];
      y.at(o) = acc;
    }
    tape.saved = {x};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    Tensor gx = x;
    std::fill(gx.data.begin(), gx.data.end(), 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
      double g = gy.data[o];
      b_.grad.at(o) += g;
      double* gw = &w_.grad.data[o * in_];
      const double* wrow = &w_.value.data[o * in_];
      for (std::size_t i = 0; i < in_; ++i) {
        gw[i] += g * x.data[i];
        gx.data[i] += g * wrow[i];
      }
    }
    return gx;
  }

  std::vector<Param*> params() override { return {&w_, &b_}; }

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

 private:
  std::size_t in_, out_;
  Param w_, b_;
};

// ----------------------------------------------------------------- ReLU
class Relu : public Layer {
 public:
  const char* kind() const override { return "relu"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    tape.saved = {x};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (x.data[i] <= 0.0) gx.data[i] = 0.0;
    return gx;
  }
};

// ----------------------------------------------------------------- GELU
// tanh approximation; used by the speech feature encoder.
class Gelu : public Layer {
 public:
  const char* kind() const override { return "gelu"; }

  static double f(double x) {
    const double c = std::sqrt(2.0 / 3.14159265358979323846);
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
  }

  static double df(double x) {
    const double c = std::sqrt(2.0 / 3.14159265358979323846);
    double u = c * (x + 0.044715 * x * x * x);
    double t = std::tanh(u);
    double du = c * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
  }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    Tensor y = x;
    for (auto& v : y.data) v = f(v);
    tape.saved = {x};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= df(x.data[i]);
    return gx;
  }
};

// --------------------------------------------------------------- Conv2D
// Cross-correlation with zero "same" padding, stride 1, channels-last
// (H, W, C). The flip-kernel convolution of the exported conv2d operation
// lives in conv_math.hpp; this layer uses the deep-learning convention.
class Conv2D : public Layer {
 public:
  Conv2D(std::size_t kh, std::size_t kw, std::size_t in_ch, std::size_t out_ch,
         std::string name = "conv")
      : kh_(kh),
        kw_(kw),
        cin_(in_ch),
        cout_(out_ch),
        w_(name + "/W", {kh, kw, in_ch, out_ch}),
        b_(name + "/b", {out_ch}) {
    if (kh_ == 0 || kw_ == 0) throw ShapeError("conv2d: empty kernel");
  }

  const char* kind() const override { return "conv2d"; }

  void init(Rng& rng) override {
    init::glorot_uniform(w_.value, kh_ * kw_ * cin_, kh_ * kw_ * cout_, rng);
  }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    check_input(x);
    const std::size_t H = x.dim(0), W = x.dim(1);
    const std::size_t ph = (kh_ - 1) / 2, pw = (kw_ - 1) / 2;
    Tensor y({H, W, cout_});
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        double* yrow = &y.data[(i * W + j) * cout_];
        for (std::size_t co = 0; co < cout_; ++co) yrow[co] = b_.value.at(co);
        for (std::size_t m = 0; m < kh_; ++m) {
          std::size_t ii = i + m;
          if (ii < ph || ii - ph >= H) continue;
          ii -= ph;
          for (std::size_t n = 0; n < kw_; ++n) {
            std::size_t jj = j + n;
            if (jj < pw || jj - pw >= W) continue;
            jj -= pw;
            const double* xrow = &x.data[(ii * W + jj) * cin_];
            const double* wrow = &w_.value.data[((m * kw_ + n) * cin_) * cout_];
            for (std::size_t ci = 0; ci < cin_; ++ci) {
              double xv = xrow[ci];
              const double* wp = wrow + ci * cout_;
              for (std::size_t co = 0; co < cout_; ++co) yrow[co] += xv * wp[co];
            }
          }
        }
      }
    }
    tape.saved = {x};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    const std::size_t H = x.dim(0), W = x.dim(1);
    const std::size_t ph = (kh_ - 1) / 2, pw = (kw_ - 1) / 2;
    Tensor gx({H, W, cin_});
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        const double* gyrow = &gy.data[(i * W + j) * cout_];
        for (std::size_t co = 0; co < cout_; ++co) b_.grad.at(co) += gyrow[co];
        for (std::size_t m = 0; m < kh_; ++m) {
          std::size_t ii = i + m;
          if (ii < ph || ii - ph >= H) continue;
          ii -= ph;
          for (std::size_t n = 0; n < kw_; ++n) {
            std::size_t jj = j + n;
            if (jj < pw || jj - pw >= W) continue;
            jj -= pw;
            const double* xrow = &x.data[(ii * W + jj) * cin_];
            double* gxrow = &gx.data[(ii * W + jj) * cin_];
            const std::size_t wbase = ((m * kw_ + n) * cin_) * cout_;
            for (std::size_t ci = 0; ci < cin_; ++ci) {
              const double* wp = &w_.value.data[wbase + ci * cout_];
              double* gwp = &w_.grad.data[wbase + ci * cout_];
              double xv = xrow[ci];
              double acc = 0.0;
              for (std::size_t co = 0; co < cout_; ++co) {
                gwp[co] += xv * gyrow[co];
                acc += wp[co] * gyrow[co];
              }
              gxrow[ci] += acc;
            }
          }
        }
      }
    }
    return gx;
  }

  std::vector<Param*> params() override { return {&w_, &b_}; }

 private:
  void check_input(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(2) != cin_)
      throw ShapeError("conv2d: input shape " + x.shape_str() + ", expected (H, W, " +
                       std::to_string(cin_) + ")");
    if (x.dim(0) == 0 || x.dim(1) == 0) throw ShapeError("conv2d: empty input");
  }

  std::size_t kh_, kw_, cin_, cout_;
  Param w_, b_;
};

// ------------------------------------------------------------ MaxPool2D
// 2x2 window, stride 2, valid; odd trailing rows/cols are dropped.
class MaxPool2D : public Layer {
 public:
  const char* kind() const override { return "maxpool2d"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    if (x.rank() != 3) throw ShapeError("maxpool2d: expected rank-3 input");
    const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
    const std::size_t OH = H / 2, OW = W / 2;
    if (OH == 0 || OW == 0)
      throw ShapeError("maxpool2d: input too small " + x.shape_str());
    Tensor y({OH, OW, C});
    Tensor idx({OH, OW, C});  // flat input index of each max, stored exactly
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        for (std::size_t c = 0; c < C; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_at = 0;
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              std::size_t flat = ((2 * i + di) * W + (2 * j + dj)) * C + c;
              if (x.data[flat] > best) {
                best = x.data[flat];
                best_at = flat;
              }
            }
          }
          y.at(i, j, c) = best;
          idx.at(i, j, c) = static_cast<double>(best_at);
        }
      }
    }
    tape.saved = {idx, Tensor({H, W, C})};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& idx = tape.saved[0];
    Tensor gx = tape.saved[1];  // zero tensor of the input shape
    for (std::size_t k = 0; k < gy.size(); ++k)
      gx.data[static_cast<std::size_t>(idx.data[k])] += gy.data[k];
    return gx;
  }
};

// -------------------------------------------------------------- Dropout
// Inverted dropout; identity at inference.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0)
      throw ConfigError("dropout rate must be in [0, 1)");
  }

  const char* kind() const override { return "dropout"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool training,
                 Rng* rng) const override {
    if (!training || rate_ == 0.0) {
      tape.saved.clear();
      return x;
    }
    if (!rng) throw ConfigError("dropout: training forward needs an RNG");
    Tensor mask = x;
    const double keep = 1.0 - rate_;
    for (auto& v : mask.data) v = (rng->uniform() >= rate_) ? 1.0 / keep : 0.0;
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= mask.data[i];
    tape.saved = {std::move(mask)};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    if (tape.saved.empty()) return gy;
    const Tensor& mask = tape.saved[0];
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= mask.data[i];
    return gx;
  }

 private:
  double rate_;
};

// ------------------------------------------------------------ SeqReshape
// (H, W, C) -> (H, W*C): rows become timesteps, channels fold into features.
class SeqReshape : public Layer {
 public:
  const char* kind() const override { return "seq_reshape"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    if (x.rank() != 3) throw ShapeError("seq_reshape: expected rank-3 input");
    tape.saved = {Tensor()};
    tape.saved[0].shape = x.shape;
    return x.reshaped({x.dim(0), x.dim(1) * x.dim(2)});
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    return gy.reshaped(tape.saved[0].shape);
  }
};

// --------------------------------------------------------------- Flatten
class Flatten : public Layer {
 public:
  const char* kind() const override { return "flatten"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    tape.saved = {Tensor()};
    tape.saved[0].shape = x.shape;
    return x.reshaped({x.size()});
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    return gy.reshaped(tape.saved[0].shape);
  }
};

// -------------------------------------------------------------- MeanPool
// (T, d) -> (d), mean over timesteps.
class MeanPool : public Layer {
 public:
  const char* kind() const override { return "mean_pool"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    if (x.rank() != 2 || x.dim(0) == 0)
      throw ShapeError("mean_pool: expected nonempty (T, d) input");
    const std::size_t T = x.dim(0), d = x.dim(1);
    Tensor y({d});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) y.data[j] += x.at(t, j);
    for (auto& v : y.data) v /= static_cast<double>(T);
    tape.saved = {Tensor()};
    tape.saved[0].shape = x.shape;
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const auto& shape = tape.saved[0].shape;
    Tensor gx(shape);
    const double inv = 1.0 / static_cast<double>(shape[0]);
    for (std::size_t t = 0; t < shape[0]; ++t)
      for (std::size_t j = 0; j < shape[1]; ++j)
        gx.at(t, j) = gy.data[j] * inv;
    return gx;
  }
};

// ------------------------------------------------------------- LayerNorm
// Normalizes over the last axis with learnable gain and bias. Rank-1 input
// is one group; rank-2 input normalizes each row (timestep) independently.
class LayerNorm : public Layer {
 public:
  explicit LayerNorm(std::size_t dim, std::string name = "ln")
      : d_(dim), g_(name + "/g", {dim}), b_(name + "/b", {dim}) {
    for (auto& v : g_.value.data) v = 1.0;
  }

  const char* kind() const override { return "layer_norm"; }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
    if (x.size() != rows * d_)
      throw ShapeError("layer_norm: input shape " + x.shape_str() +
                       " incompatible with width " + std::to_string(d_));
    Tensor y = x;
    Tensor xhat = x;   // normalized pre-affine values
    Tensor stats({rows, 2});  // mean, inv_std per row
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = &x.data[r * d_];
      double mean = 0.0;
      for (std::size_t i = 0; i < d_; ++i) mean += row[i];
      mean /= static_cast<double>(d_);
      double var = 0.0;
      for (std::size_t i = 0; i < d_; ++i)
        var += (row[i] - mean) * (row[i] - mean);
      var /= static_cast<double>(d_);
      double inv = 1.0 / std::sqrt(var + kEps);
      stats.at(r, 0) = mean;
      stats.at(r, 1) = inv;
      for (std::size_t i = 0; i < d_; ++i) {
        double v = (row[i] - mean) * inv;
        xhat.data[r * d_ + i] = v;
        y.data[r * d_ + i] = g_.value.at(i) * v + b_.value.at(i);
      }
    }
    tape.saved = {xhat, stats};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& xhat = tape.saved[0];
    const Tensor& stats = tape.saved[1];
    const std::size_t rows = stats.dim(0);
    Tensor gx = gy;
    for (std::size_t r = 0; r < rows; ++r) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < d_; ++i) {
        double go = gy.data[r * d_ + i];
        double xh = xhat.data[r * d_ + i];
        g_.grad.at(i) += go * xh;
        b_.grad.at(i) += go;
        double gxi = go * g_.value.at(i);
        sum_g += gxi;
        sum_gx += gxi * xh;
      }
      double inv = stats.at(r, 1);
      double n = static_cast<double>(d_);
      for (std::size_t i = 0; i < d_; ++i) {
        double gxi = gy.data[r * d_ + i] * g_.value.at(i);
        double xh = xhat.data[r * d_ + i];
        gx.data[r * d_ + i] = inv * (gxi - sum_g / n - xh * sum_gx / n);
      }
    }
    return gx;
  }

  std::vector<Param*> params() override { return {&g_, &b_}; }

 private:
  static constexpr double kEps = 1e-5;
  std::size_t d_;
  Param g_, b_;
};

// ------------------------------------------------------------------ LSTM
// Single direction, returns the full hidden sequence (T, units).
// Gate order inside the packed weights: input, forget, cell, output.
class Lstm : public Layer {
 public:
  Lstm(std::size_t in_dim, std::size_t units, std::string name = "lstm")
      : in_(in_dim),
        units_(units),
        w_(name + "/W", {4 * units, in_dim}),
        u_(name + "/U", {4 * units, units}),
        b_(name + "/b", {4 * units}) {
    if (units_ == 0) throw ConfigError("lstm: units must be positive");
  }

  const char* kind() const override { return "lstm"; }

  void init(Rng& rng) override {
    init::glorot_uniform(w_.value, in_, units_, rng);
    init::glorot_uniform(u_.value, units_, units_, rng);
    for (std::size_t k = 0; k < units_; ++k)
      b_.value.at(units_ + k) = 1.0;  // forget-gate bias
  }

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    if (x.rank() != 2 || x.dim(1) != in_)
      throw ShapeError("lstm: input shape " + x.shape_str() + ", expected (T, " +
                       std::to_string(in_) + ")");
    const std::size_t T = x.dim(0), u = units_;
    Tensor I({T, u}), F({T, u}), G({T, u}), O({T, u}), C({T, u}), TC({T, u}),
        H({T, u});
    std::vector<double> z(4 * u);
    std::vector<double> h_prev(u, 0.0), c_prev(u, 0.0);

    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t r = 0; r < 4 * u; ++r) {
        double acc = b_.value.at(r);
        const double* wrow = &w_.value.data[r * in_];
        const double* xrow = &x.data[t * in_];
        for (std::size_t i = 0; i < in_; ++i) acc += wrow[i] * xrow[i];
        const double* urow = &u_.value.data[r * u];
        for (std::size_t i = 0; i < u; ++i) acc += urow[i] * h_prev[i];
        z[r] = acc;
      }
      for (std::size_t k = 0; k < u; ++k) {
        double iv = sigmoid(z[k]);
        double fv = sigmoid(z[u + k]);
        double gv = std::tanh(z[2 * u + k]);
        double ov = sigmoid(z[3 * u + k]);
        double cv = fv * c_prev[k] + iv * gv;
        double tc = std::tanh(cv);
        double hv = ov * tc;
        I.at(t, k) = iv;
        F.at(t, k) = fv;
        G.at(t, k) = gv;
        O.at(t, k) = ov;
        C.at(t, k) = cv;
        TC.at(t, k) = tc;
        H.at(t, k) = hv;
      }
      for (std::size_t k = 0; k < u; ++k) {
        h_prev[k] = H.at(t, k);
        c_prev[k] = C.at(t, k);
      }
    }
    tape.saved = {x, I, F, G, O, C, TC, H};
    return H;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    const Tensor &I = tape.saved[1], &F = tape.saved[2], &G = tape.saved[3],
                 &O = tape.saved[4], &C = tape.saved[5], &TC = tape.saved[6],
                 &H = tape.saved[7];
    const std::size_t T = x.dim(0), u = units_;
    Tensor gx({T, in_});
    std::vector<double> dh_next(u, 0.0), dc_next(u, 0.0), dz(4 * u);

    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t k = 0; k < u; ++k) {
        double dh = gy.at(t, k) + dh_next[k];
        double iv = I.at(t, k), fv = F.at(t, k), gv = G.at(t, k),
               ov = O.at(t, k), tc = TC.at(t, k);
        double dov = dh * tc;
        double dc = dh * ov * (1.0 - tc * tc) + dc_next[k];
        double c_prev = (t > 0) ? C.at(t - 1, k) : 0.0;
        double div = dc * gv;
        double dgv = dc * iv;
        double dfv = dc * c_prev;
        dc_next[k] = dc * fv;
        dz[k] = div * iv * (1.0 - iv);
        dz[u + k] = dfv * fv * (1.0 - fv);
        dz[2 * u + k] = dgv * (1.0 - gv * gv);
        dz[3 * u + k] = dov * ov * (1.0 - ov);
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t r = 0; r < 4 * u; ++r) {
        double g = dz[r];
        if (g == 0.0) continue;
        b_.grad.at(r) += g;
        double* gw = &w_.grad.data[r * in_];
        const double* xrow = &x.data[t * in_];
        const double* wrow = &w_.value.data[r * in_];
        double* gxrow = &gx.data[t * in_];
        for (std::size_t i = 0; i < in_; ++i) {
          gw[i] += g * xrow[i];
          gxrow[i] += g * wrow[i];
        }
        double* gu = &u_.grad.data[r * u];
        const double* urow = &u_.value.data[r * u];
        for (std::size_t i = 0; i < u; ++i) {
          double hp = (t > 0) ? H.at(t - 1, i) : 0.0;
          gu[i] += g * hp;
          dh_next[i] += g * urow[i];
        }
      }
    }
    return gx;
  }

  std::vector<Param*> params() override { return {&w_, &u_, &b_}; }

 private:
  std::size_t in_, units_;
  Param w_, u_, b_;
};

// --------------------------------------------------------- SelfAttention
// Scaled dot-product self-attention with learned Q/K/V projections of the
// input width. Attention weights are row-softmax; output keeps the input
// shape (T, d).
class SelfAttention : public Layer {
 public:
  explicit SelfAttention(std::size_t dim, std::string name = "attn")
      : d_(dim),
        wq_(name + "/Wq", {dim, dim}),
        wk_(name + "/Wk", {dim, dim}),
        wv_(name + "/Wv", {dim, dim}) {}

  const char* kind() const override { return "self_attention"; }

  void init(Rng& rng) override {
    init::glorot_uniform(wq_.value, d_, d_, rng);
    init::glorot_uniform(wk_.value, d_, d_, rng);
    init::glorot_uniform(wv_.value, d_, d_, rng);
  }

  // x (T,d) times projection (d,d) -> (T,d)
  static Tensor project(const Tensor& x, const Tensor& w) {
    const std::size_t T = x.dim(0), d = x.dim(1);
    Tensor y({T, d});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < d; ++i) {
        double xv = x.at(t, i);
        if (xv == 0.0) continue;
        const double* wrow = &w.data[i * d];
        double* yrow = &y.data[t * d];
        for (std::size_t j = 0; j < d; ++j) yrow[j] += xv * wrow[j];
      }
    return y;
  }

  Tensor forward(const Tensor& x, TapeSlot& tape, bool, Rng*) const override {
    if (x.rank() != 2 || x.dim(1) != d_)
      throw ShapeError("self_attention: input shape " + x.shape_str() +
                       ", expected (T, " + std::to_string(d_) + ")");
    const std::size_t T = x.dim(0), d = d_;
    Tensor q = project(x, wq_.value);
    Tensor k = project(x, wk_.value);
    Tensor v = project(x, wv_.value);

    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor attn({T, T});
    for (std::size_t i = 0; i < T; ++i) {
      double maxv = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < T; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q.at(i, c) * k.at(j, c);
        s *= scale;
        attn.at(i, j) = s;
        maxv = std::max(maxv, s);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        double e = std::exp(attn.at(i, j) - maxv);
        attn.at(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < T; ++j) attn.at(i, j) /= sum;
    }

    Tensor y({T, d});
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = 0; j < T; ++j) {
        double a = attn.at(i, j);
        if (a == 0.0) continue;
        const double* vrow = &v.data[j * d];
        double* yrow = &y.data[i * d];
        for (std::size_t c = 0; c < d; ++c) yrow[c] += a * vrow[c];
      }
    tape.saved = {x, q, k, v, attn};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    const Tensor &q = tape.saved[1], &k = tape.saved[2], &v = tape.saved[3],
                 &attn = tape.saved[4];
    const std::size_t T = x.dim(0), d = d_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    // dA = gy V^T ; dV = A^T gy
    Tensor d_attn({T, T});
    Tensor dv({T, d});
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j = 0; j < T; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += gy.at(i, c) * v.at(j, c);
        d_attn.at(i, j) = acc;
        double a = attn.at(i, j);
        for (std::size_t c = 0; c < d; ++c) dv.at(j, c) += a * gy.at(i, c);
      }
    }
    // softmax backward per row, then scale
    Tensor ds({T, T});
    for (std::size_t i = 0; i < T; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < T; ++j) dot += d_attn.at(i, j) * attn.at(i, j);
      for (std::size_t j = 0; j < T; ++j)
        ds.at(i, j) = attn.at(i, j) * (d_attn.at(i, j) - dot) * scale;
    }
    // dQ = dS K ; dK = dS^T Q
    Tensor dq({T, d}), dk({T, d});
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = 0; j < T; ++j) {
        double s = ds.at(i, j);
        if (s == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) {
          dq.at(i, c) += s * k.at(j, c);
          dk.at(j, c) += s * q.at(i, c);
        }
      }

    // Parameter grads: gW = X^T dY for each projection; input grad via W^T.
    Tensor gx({T, d});
    accumulate_projection(x, dq, wq_, gx);
    accumulate_projection(x, dk, wk_, gx);
    accumulate_projection(x, dv, wv_, gx);
    return gx;
  }

  std::vector<Param*> params() override { return {&wq_, &wk_, &wv_}; }

 private:
  void accumulate_projection(const Tensor& x, const Tensor& dy, Param& w,
                             Tensor& gx) {
    const std::size_t T = x.dim(0), d = d_;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < d; ++i) {
        double xv = x.at(t, i);
        double* gwrow = &w.grad.data[i * d];
        const double* wrow = &w.value.data[i * d];
        const double* dyrow = &dy.data[t * d];
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          gwrow[j] += xv * dyrow[j];
          acc += wrow[j] * dyrow[j];
        }
        gx.at(t, i) += acc;
      }
  }

  std::size_t d_;
  Param wq_, wk_, wv_;
};

// ---------------------------------------------------------------- Conv1D
// Strided valid cross-correlation over (T, Cin) -> (T', Cout); inputs
// shorter than the kernel are zero-padded up to one window.
class Conv1D : public Layer {
 public:
  Conv1D(std::size_t kernel, std::size_t stride, std::size_t in_ch,
         std::size_t out_ch, std::string name = "conv1d")
      : k_(kernel),
        s_(stride),
        cin_(in_ch),
        cout_(out_ch),
        w_(name + "/W", {kernel, in_ch, out_ch}),
        b_(name + "/b", {out_ch}) {
    if (k_ == 0 || s_ == 0) throw ConfigError("conv1d: kernel/stride must be positive");
  }

  const char* kind() const override { return "conv1d"; }

  void init(Rng& rng) override {
    init::glorot_uniform(w_.value, k_ * cin_, k_ * cout_, rng);
  }

  Tensor forward(const Tensor& xin, TapeSlot& tape, bool, Rng*) const override {
    if (xin.rank() != 2 || xin.dim(1) != cin_)
      throw ShapeError("conv1d: input shape " + xin.shape_str() +
                       ", expected (T, " + std::to_string(cin_) + ")");
    Tensor x = xin;
    if (x.dim(0) < k_) {  // pad tiny inputs to a single window
      Tensor padded({k_, cin_});
      std::copy(x.data.begin(), x.data.end(), padded.data.begin());
      x = std::move(padded);
    }
    const std::size_t T = x.dim(0);
    const std::size_t To = (T - k_) / s_ + 1;
    Tensor y({To, cout_});
    for (std::size_t t = 0; t < To; ++t) {
      double* yrow = &y.data[t * cout_];
      for (std::size_t co = 0; co < cout_; ++co) yrow[co] = b_.value.at(co);
      for (std::size_t m = 0; m < k_; ++m) {
        const double* xrow = &x.data[(t * s_ + m) * cin_];
        const double* wrow = &w_.value.data[(m * cin_) * cout_];
        for (std::size_t ci = 0; ci < cin_; ++ci) {
          double xv = xrow[ci];
          if (xv == 0.0) continue;
          const double* wp = wrow + ci * cout_;
          for (std::size_t co = 0; co < cout_; ++co) yrow[co] += xv * wp[co];
        }
      }
    }
    tape.saved = {x, Tensor({xin.dim(0), xin.dim(1)})};
    return y;
  }

  Tensor backward(const Tensor& gy, const TapeSlot& tape) override {
    const Tensor& x = tape.saved[0];
    const std::size_t T = x.dim(0);
    const std::size_t To = gy.dim(0);
    Tensor gx_padded({T, cin_});
    for (std::size_t t = 0; t < To; ++t) {
      const double* gyrow = &gy.data[t * cout_];
      for (std::size_t co = 0; co < cout_; ++co) b_.grad.at(co) += gyrow[co];
      for (std::size_t m = 0; m < k_; ++m) {
        const double* xrow = &x.data[(t * s_ + m) * cin_];
        double* gxrow = &gx_padded.data[(t * s_ + m) * cin_];
        const std::size_t wbase = (m * cin_) * cout_;
        for (std::size_t ci = 0; ci < cin_; ++ci) {
          const double* wp = &w_.value.data[wbase + ci * cout_];
          double* gwp = &w_.grad.data[wbase + ci * cout_];
          double xv = xrow[ci];
          double acc = 0.0;
          for (std::size_t co = 0; co < cout_; ++co) {
            gwp[co] += xv * gyrow[co];
            acc += wp[co] * gyrow[co];
          }
          gxrow[ci] += acc;
        }
      }
    }
    // un-pad if the forward padded
    const auto& orig_shape = tape.saved[1].shape;
    if (orig_shape[0] < T) {
      Tensor gx(orig_shape);
      std::copy(gx_padded.data.begin(),
                gx_padded.data.begin() + static_cast<std::ptrdiff_t>(gx.size()),
                gx.data.begin());
      return gx;
    }
    return gx_padded;
  }

  std::vector<Param*> params() override { return {&w_, &b_}; }

 private:
  std::size_t k_, s_, cin_, cout_;
  Param w_, b_;
};

}  // namespace emofuse::nn
