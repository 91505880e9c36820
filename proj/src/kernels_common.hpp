#pragma once

// Shared helpers for the kernel backends. Both backends read 3x3-conv inputs
// through the same zero-padded scratch layout so their term sequences match.

#include <cstring>
#include <vector>

#include "blendnet/kernels.hpp"

namespace blendnet::kern::detail {

// [C,H,W] -> [C,H+2p,W+2p] with a zero border.
inline std::vector<double> pad_planes(const double* x, size_t C, size_t H, size_t W, size_t p) {
  const size_t Hp = H + 2 * p, Wp = W + 2 * p;
  std::vector<double> out(C * Hp * Wp, 0.0);
  for (size_t c = 0; c < C; ++c)
    for (size_t y = 0; y < H; ++y)
      std::memcpy(&out[(c * Hp + y + p) * Wp + p], &x[(c * H + y) * W], W * sizeof(double));
  return out;
}

// [M,N] -> [N,M]
inline std::vector<double> transpose(const double* a, size_t M, size_t N) {
  std::vector<double> out(M * N);
  for (size_t m = 0; m < M; ++m)
    for (size_t n = 0; n < N; ++n) out[n * M + m] = a[m * N + n];
  return out;
}

// Rewrites the conv3x3 input gradient as a plain stride-1 correlation: output
// gradients scattered into a stride-dilated buffer with a (2-pad) zero
// margin, against channel-transposed, spatially flipped weights. Feeding the
// plan through a backend's conv3x3 (stride 1, pad 0, input [Co, H+2, W+2])
// yields gx [Ci, H, W] directly, so backends inherit bit-equality of the
// input gradient from bit-equality of the forward kernel.
struct BwdInputPlan {
  std::vector<double> taps;     // [Co, H+2, W+2]
  std::vector<double> weights;  // [Ci, Co, 3, 3]
};

inline BwdInputPlan bwd_input_plan(const double* w, const double* gy, size_t Ci, size_t H,
                                   size_t W, size_t Co, size_t stride, size_t pad) {
  const size_t Ho = conv_out_dim(H, pad, stride), Wo = conv_out_dim(W, pad, stride);
  const size_t Ht = H + 2, Wt = W + 2;
  const size_t margin = 2 - pad;
  BwdInputPlan plan;
  plan.taps.assign(Co * Ht * Wt, 0.0);
  for (size_t co = 0; co < Co; ++co)
    for (size_t oy = 0; oy < Ho; ++oy) {
      double* trow = &plan.taps[(co * Ht + margin + oy * stride) * Wt + margin];
      const double* grow = gy + (co * Ho + oy) * Wo;
      for (size_t ox = 0; ox < Wo; ++ox) trow[ox * stride] = grow[ox];
    }
  plan.weights.resize(Ci * Co * 9);
  for (size_t ci = 0; ci < Ci; ++ci)
    for (size_t co = 0; co < Co; ++co)
      for (size_t ky = 0; ky < 3; ++ky)
        for (size_t kx = 0; kx < 3; ++kx)
          plan.weights[((ci * Co + co) * 3 + ky) * 3 + kx] =
              w[((co * Ci + ci) * 3 + (2 - ky)) * 3 + (2 - kx)];
  return plan;
}

}  // namespace blendnet::kern::detail
