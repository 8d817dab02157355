#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "emofuse/nn/layers.hpp"
#include "emofuse/nn/loss.hpp"
#include "emofuse/nn/network.hpp"
#include "emofuse/nn/train.hpp"
#include "support/gradcheck.hpp"

using namespace emofuse;
using nn::Tensor;

namespace {
constexpr double kStep = 1e-4;
constexpr double kTol = 1e-3;
}  // namespace

TEST_CASE("dense gradients match central finite differences") {
  Rng rng(10);
  nn::Dense layer(7, 5);
  layer.init(rng);
  auto r = gradcheck::check_layer(layer, gradcheck::smooth_random({7}, rng), kStep);
  INFO("checked " << r.checked << " scalars");
  REQUIRE(r.max_rel_error < kTol);
}

TEST_CASE("conv2d layer gradients match central finite differences") {
  Rng rng(11);
  nn::Conv2D layer(3, 3, 2, 3);
  layer.init(rng);
  auto r = gradcheck::check_layer(layer, gradcheck::smooth_random({6, 5, 2}, rng), kStep);
  REQUIRE(r.max_rel_error < kTol);
}

TEST_CASE("conv1d layer gradients match central finite differences") {
  Rng rng(12);
  nn::Conv1D layer(4, 2, 2, 3);
  layer.init(rng);
  auto r = gradcheck::check_layer(layer, gradcheck::smooth_random({11, 2}, rng), kStep);
  REQUIRE(r.max_rel_error < kTol);
}

TEST_CASE("lstm gradients match central finite differences") {
  Rng rng(13);
  nn::Lstm layer(3, 5);
  layer.init(rng);
  auto r = gradcheck::check_layer(layer, gradcheck::smooth_random({4, 3}, rng), kStep);
  REQUIRE(r.max_rel_error < kTol);
}

TEST_CASE("self-attention gradients match central finite differences") {
  Rng rng(14);
  nn::SelfAttention layer(4);
  layer.init(rng);
  auto r = gradcheck::check_layer(layer, gradcheck::smooth_random({5, 4}, rng), kStep);
  REQUIRE(r.max_rel_error < kTol);
}

TEST_CASE("layer-norm gradients match central finite differences") {
  Rng rng(23);
  nn::LayerNorm ln(6);
  // perturb the affine params away from identity
  for (auto* p : ln.params())
    for (auto& v : p->value.data) v += rng.uniform(-0.3, 0.3);
  REQUIRE(gradcheck::check_layer(ln, gradcheck::smooth_random({6}, rng), kStep)
              .max_rel_error < kTol);
  REQUIRE(gradcheck::check_layer(ln, gradcheck::smooth_random({3, 6}, rng), kStep)
              .max_rel_error < kTol);
}

TEST_CASE("gelu and mean-pool gradients match central finite differences") {
  Rng rng(15);
  nn::Gelu gelu;
  REQUIRE(gradcheck::check_layer(gelu, gradcheck::smooth_random({9}, rng), kStep)
              .max_rel_error < kTol);
  nn::MeanPool pool;
  REQUIRE(gradcheck::check_layer(pool, gradcheck::smooth_random({6, 3}, rng), kStep)
              .max_rel_error < kTol);
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(16);
  Tensor logits = gradcheck::smooth_random({4}, rng);
  auto res = nn::softmax_cross_entropy(logits, 2);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double keep = logits.data[i];
    logits.data[i] = keep + kStep;
    double up = nn::softmax_cross_entropy(logits, 2).loss;
    logits.data[i] = keep - kStep;
    double down = nn::softmax_cross_entropy(logits, 2).loss;
    logits.data[i] = keep;
    double numeric = (up - down) / (2.0 * kStep);
    REQUIRE(gradcheck::rel_error(res.dlogits.data[i], numeric) < kTol);
  }
}

TEST_CASE("softmax output is a probability simplex point") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits({4});
    for (auto& v : logits.data) v = rng.uniform(-30.0, 30.0);
    auto p = nn::softmax(logits);
    double sum = 0.0;
    for (double v : p.data) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("argmax breaks ties at the lowest index") {
  Tensor p({4});
  p.data = {0.25, 0.25, 0.25, 0.25};
  REQUIRE(nn::argmax_lowest(p) == 0);
  p.data = {0.1, 0.4, 0.4, 0.1};
  REQUIRE(nn::argmax_lowest(p) == 1);
}

TEST_CASE("self-attention weights are row-stochastic and T=1 is the value row") {
  Rng rng(18);
  nn::SelfAttention attn(8);
  attn.init(rng);

  Tensor x = gradcheck::smooth_random({5, 8}, rng);
  nn::TapeSlot tape;
  Tensor y = attn.forward(x, tape, false, nullptr);
  REQUIRE(y.shape == x.shape);
  const Tensor& weights = tape.saved[4];
  for (std::size_t i = 0; i < 5; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) sum += weights.at(i, j);
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-6));
  }

  // single timestep: attention weight matrix is [[1]] and the output equals
  // the value projection of that row
  Tensor one = gradcheck::smooth_random({1, 8}, rng);
  nn::TapeSlot tape1;
  Tensor y1 = attn.forward(one, tape1, false, nullptr);
  REQUIRE(tape1.saved[4].at(0, 0) == Catch::Approx(1.0).margin(1e-12));
  const Tensor& v = tape1.saved[3];
  for (std::size_t c = 0; c < 8; ++c)
    REQUIRE(y1.at(0, c) == Catch::Approx(v.at(0, c)).margin(1e-12));
}

TEST_CASE("maxpool halves dims, drops odd edges, and routes gradients") {
  Rng rng(19);
  nn::MaxPool2D pool;
  Tensor x = gradcheck::smooth_random({5, 7, 2}, rng);
  nn::TapeSlot tape;
  Tensor y = pool.forward(x, tape, false, nullptr);
  REQUIRE(y.shape == std::vector<std::size_t>{2, 3, 2});
  auto r = gradcheck::check_layer(pool, x, kStep);
  REQUIRE(r.max_rel_error < kTol);
}

TEST_CASE("dropout is identity at inference and masks in training") {
  Rng rng(20);
  nn::Dropout drop(0.5);
  Tensor x = gradcheck::smooth_random({50}, rng);
  nn::TapeSlot tape;
  Tensor y_inf = drop.forward(x, tape, false, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y_inf.data[i] == x.data[i]);

  Rng drng(7);
  Tensor y_tr = drop.forward(x, tape, true, &drng);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y_tr.data[i] == 0.0)
      ++zeros;
    else
      REQUIRE(y_tr.data[i] == Catch::Approx(2.0 * x.data[i]).margin(1e-12));
  }
  REQUIRE(zeros > 5);
  REQUIRE(zeros < 45);
}

TEST_CASE("network init is deterministic given the seed") {
  nn::Network n1, n2;
  n1.add<nn::Dense>(6, 8, "a");
  n1.add<nn::Relu>();
  n1.add<nn::Dense>(8, 4, "b");
  n2.add<nn::Dense>(6, 8, "a");
  n2.add<nn::Relu>();
  n2.add<nn::Dense>(8, 4, "b");
  Rng r1(99), r2(99);
  n1.init(r1);
  n2.init(r2);
  auto p1 = n1.params(), p2 = n2.params();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t k = 0; k < p1.size(); ++k)
    REQUIRE(p1[k]->value.data == p2[k]->value.data);
}

TEST_CASE("training: epochs=0 is a no-op, same seed reproduces the loss") {
  Rng data_rng(21);
  std::vector<Tensor> xs;
  std::vector<int> ys;
  for (int i = 0; i < 12; ++i) {
    Tensor x({6});
    int label = i % 3;
    for (auto& v : x.data) v = data_rng.normal(label, 0.3);
    xs.push_back(x);
    ys.push_back(label);
  }

  auto make_net = [] {
    nn::Network net;
    net.add<nn::Dense>(6, 16, "h");
    net.add<nn::Relu>();
    net.add<nn::Dense>(16, 4, "o");
    Rng rng(7);
    net.init(rng);
    return net;
  };

  nn::TrainOptions opt;
  opt.epochs = 0;
  nn::Network net0 = make_net();
  auto before = net0.params()[0]->value.data;
  // epochs=0: the loop body never runs, weights stay put
  REQUIRE_THROWS_AS(nn::train_classifier(net0, {}, {}, opt), ValidationError);
  auto stats0 = nn::train_classifier(net0, xs, ys, opt);
  REQUIRE(stats0.epochs_run == 0);
  REQUIRE(net0.params()[0]->value.data == before);

  opt.epochs = 20;
  opt.learning_rate = 0.05;
  opt.optimizer = "adam";
  opt.seed = 31;
  nn::Network a = make_net(), b = make_net();
  auto sa = nn::train_classifier(a, xs, ys, opt);
  auto sb = nn::train_classifier(b, xs, ys, opt);
  REQUIRE(sa.final_loss == sb.final_loss);
  REQUIRE(sa.final_train_accuracy == 1.0);
}

TEST_CASE("NaN loss aborts with a diagnostic naming the epoch") {
  nn::Network net;
  net.add<nn::Dense>(2, 4, "o");
  Rng rng(3);
  net.init(rng);
  Tensor bad({2});
  bad.data = {std::nan(""), 1.0};
  nn::TrainOptions opt;
  opt.epochs = 1;
  REQUIRE_THROWS_WITH(nn::train_classifier(net, {bad}, {0}, opt),
                      Catch::Matchers::ContainsSubstring("epoch 0"));
}

TEST_CASE("sgd and adam both reduce the loss on a separable toy set") {
  Rng data_rng(22);
  std::vector<Tensor> xs;
  std::vector<int> ys;
  for (int i = 0; i < 16; ++i) {
    Tensor x({4});
    int label = i % 4;
    for (std::size_t j = 0; j < 4; ++j)
      x.data[j] = (static_cast<int>(j) == label ? 2.0 : 0.0) + data_rng.normal(0, 0.1);
    xs.push_back(x);
    ys.push_back(label);
  }
  for (const char* optname : {"sgd", "adam"}) {
    nn::Network net;
    net.add<nn::Dense>(4, 4, "o");
    Rng rng(5);
    net.init(rng);
    nn::TrainOptions opt;
    opt.epochs = 30;
    opt.optimizer = optname;
    opt.learning_rate = 0.1;
    auto stats = nn::train_classifier(net, xs, ys, opt);
    REQUIRE(stats.history.front().loss > stats.final_loss);
    REQUIRE(stats.final_train_accuracy == 1.0);
  }
}

TEST_CASE("unknown optimizer is a config error") {
  REQUIRE_THROWS_AS(nn::make_optimizer("rmsprop", 0.1), ConfigError);
}
