#pragma once

#include <string>

#include "emofuse/error.hpp"
#include "emofuse/nn/tensor.hpp"

namespace emofuse::nn {

enum class ConvMode { full, same, valid };

// True 2-D convolution of a single-channel grid with a flipped kernel:
//
//   z(i, j) = sum_m sum_n x(m, n) * y(i - m, j - n)
//
// This is the flip-kernel definition; the Conv2D layer uses the usual
// deep-learning cross-correlation, so the two are wired together through
// this function in tests. "same" crops the full output at the kernel
// center, matching stride-1 zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& kernel,
                     ConvMode mode = ConvMode::valid) {
  if (x.rank() != 2 || kernel.rank() != 2)
    throw ShapeError("conv2d: expected rank-2 input and kernel");
  const std::size_t H = x.dim(0), W = x.dim(1);
  const std::size_t a = kernel.dim(0), b = kernel.dim(1);
  if (H == 0 || W == 0 || a == 0 || b == 0)
    throw ShapeError("conv2d: empty input or kernel");
  if (mode == ConvMode::valid && (a > H || b > W))
    throw ShapeError("conv2d: kernel larger than input in valid mode");

  Tensor full({H + a - 1, W + b - 1});
  for (std::size_t m = 0; m < H; ++m)
    for (std::size_t n = 0; n < W; ++n) {
      const double xv = x.at(m, n);
      if (xv == 0.0) continue;
      for (std::size_t p = 0; p < a; ++p)
        for (std::size_t q = 0; q < b; ++q)
          full.at(m + p, n + q) += xv * kernel.at(p, q);
    }
  if (mode == ConvMode::full) return full;

  std::size_t oi, oj, oh, ow;
  if (mode == ConvMode::valid) {
    oi = a - 1;
    oj = b - 1;
    oh = H - a + 1;
    ow = W - b + 1;
  } else {  // same
    oi = (a - 1) / 2;
    oj = (b - 1) / 2;
    oh = H;
    ow = W;
  }
  Tensor out({oh, ow});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) out.at(i, j) = full.at(oi + i, oj + j);
  return out;
}

}  // namespace emofuse::nn
