#include <catch2/catch_amalgamated.hpp>

#include "emofuse/nn/conv_math.hpp"
#include "emofuse/rng.hpp"
#include "support/oracles.hpp"

using namespace emofuse;
using nn::ConvMode;
using nn::Tensor;

namespace {

Tensor random_matrix(std::size_t h, std::size_t w, Rng& rng) {
  Tensor t({h, w});
  for (auto& v : t.data) v = rng.uniform(-2.0, 2.0);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape == b.shape);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("1x1 identity kernel reproduces the input") {
  Rng rng(1);
  Tensor x = random_matrix(5, 7, rng);
  Tensor k({1, 1});
  k.at(0, 0) = 1.0;
  for (auto mode : {ConvMode::valid, ConvMode::same, ConvMode::full}) {
    auto y = nn::conv2d(x, k, mode);
    REQUIRE(max_abs_diff(y, x) == 0.0);
  }
}

TEST_CASE("frozen example: flip-kernel valid convolution of 2x2 grids") {
  Tensor x({2, 2});
  x.data = {1, 2, 3, 4};
  Tensor y({2, 2});
  y.data = {1, 0, 0, 1};
  auto z = nn::conv2d(x, y, ConvMode::valid);
  REQUIRE(z.shape == std::vector<std::size_t>{1, 1});
  // computed with the double-sum oracle: only y(0,0) and y(1,1) contribute,
  // pairing x(1,1) and x(0,0) -> 4 + 1 = 5
  REQUIRE(z.at(0, 0) == Catch::Approx(5.0).margin(1e-12));
  auto ref = oracle::conv2d_valid(x, y);
  REQUIRE(max_abs_diff(z, ref) < 1e-12);
}

TEST_CASE("random instances match the brute-force double-sum oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t h = static_cast<std::size_t>(rng.uniform_int(1, 10));
    std::size_t w = static_cast<std::size_t>(rng.uniform_int(1, 10));
    std::size_t a = static_cast<std::size_t>(rng.uniform_int(1, std::min<int>(5, static_cast<int>(h))));
    std::size_t b = static_cast<std::size_t>(rng.uniform_int(1, std::min<int>(5, static_cast<int>(w))));
    Tensor x = random_matrix(h, w, rng);
    Tensor k = random_matrix(a, b, rng);

    REQUIRE(max_abs_diff(nn::conv2d(x, k, ConvMode::full),
                         oracle::conv2d_full(x, k)) < 1e-6);
    REQUIRE(max_abs_diff(nn::conv2d(x, k, ConvMode::valid),
                         oracle::conv2d_valid(x, k)) < 1e-6);
    REQUIRE(max_abs_diff(nn::conv2d(x, k, ConvMode::same),
                         oracle::conv2d_same(x, k)) < 1e-6);
  }
}

TEST_CASE("same mode preserves shape; valid mode shrinks by kernel-1") {
  Rng rng(5);
  Tensor x = random_matrix(8, 6, rng);
  Tensor k = random_matrix(3, 3, rng);
  REQUIRE(nn::conv2d(x, k, ConvMode::same).shape == x.shape);
  auto v = nn::conv2d(x, k, ConvMode::valid);
  REQUIRE(v.shape == std::vector<std::size_t>{6, 4});
}

TEST_CASE("empty and oversize kernels are shape errors") {
  Tensor x({2, 2});
  Tensor empty;
  REQUIRE_THROWS_AS(nn::conv2d(x, empty, ConvMode::valid), ShapeError);
  REQUIRE_THROWS_AS(nn::conv2d(empty, x, ConvMode::valid), ShapeError);
  Tensor big({3, 3});
  REQUIRE_THROWS_AS(nn::conv2d(x, big, ConvMode::valid), ShapeError);
  REQUIRE_NOTHROW(nn::conv2d(x, big, ConvMode::full));
}
