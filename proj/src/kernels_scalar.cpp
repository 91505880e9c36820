#include "blendnet/kernels.hpp"

#include <vector>

#include "kernels_common.hpp"

// Scalar reference backend. Every kernel here is the definition of the
// accumulation order the SIMD variants must reproduce bit for bit.

namespace blendnet::kern {
namespace {

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

void s_add(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void s_scale(double c, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = c * x[i];
}

void s_add_scalar(double c, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] + c;
}

void s_axpy(double c, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

void s_relu(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_bwd(const double* x, const double* gy, double* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

void s_sgd_update(double* p, double* v, const double* g, double lr, double momentum, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

// ---------------------------------------------------------------------------
// dense products
// ---------------------------------------------------------------------------

void s_gemm_nn(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  for (size_t m = 0; m < M; ++m)
    for (size_t n = 0; n < N; ++n) {
      double acc = 0.0;
      for (size_t k = 0; k < K; ++k) acc += A[m * K + k] * B[k * N + n];
      C[m * N + n] = acc;
    }
}

void s_gemm_tn(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  for (size_t m = 0; m < M; ++m)
    for (size_t n = 0; n < N; ++n) {
      double acc = 0.0;
      for (size_t k = 0; k < K; ++k) acc += A[k * M + m] * B[k * N + n];
      C[m * N + n] = acc;
    }
}

void s_gemm_nt(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  for (size_t m = 0; m < M; ++m)
    for (size_t n = 0; n < N; ++n) {
      double acc = 0.0;
      for (size_t k = 0; k < K; ++k) acc += A[m * K + k] * B[n * K + k];
      C[m * N + n] = acc;
    }
}

// ---------------------------------------------------------------------------
// 3x3 convolution
// ---------------------------------------------------------------------------

void s_conv3x3(const double* x, const double* w, double* y,
               size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad) {
  const size_t Ho = conv_out_dim(H, pad, stride), Wo = conv_out_dim(W, pad, stride);
  const size_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  auto xp = detail::pad_planes(x, Ci, H, W, pad);
  for (size_t co = 0; co < Co; ++co) {
    const double* wc = w + co * Ci * 9;
    for (size_t oy = 0; oy < Ho; ++oy)
      for (size_t ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (size_t ci = 0; ci < Ci; ++ci) {
          const double* plane = xp.data() + ci * Hp * Wp;
          const double* wk = wc + ci * 9;
          for (size_t ky = 0; ky < 3; ++ky) {
            const double* row = plane + (oy * stride + ky) * Wp + ox * stride;
            acc += wk[ky * 3 + 0] * row[0];
            acc += wk[ky * 3 + 1] * row[1];
            acc += wk[ky * 3 + 2] * row[2];
          }
        }
        y[(co * Ho + oy) * Wo + ox] = acc;
      }
  }
}

void s_conv3x3_bwd_input(const double* w, const double* gy, double* gx,
                         size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad) {
  auto plan = detail::bwd_input_plan(w, gy, Ci, H, W, Co, stride, pad);
  s_conv3x3(plan.taps.data(), plan.weights.data(), gx, Co, H + 2, W + 2, Ci, 1, 0);
}

void s_conv3x3_bwd_weight(const double* x, const double* gy, double* gw,
                          size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad) {
  const size_t Ho = conv_out_dim(H, pad, stride), Wo = conv_out_dim(W, pad, stride);
  const size_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  auto xp = detail::pad_planes(x, Ci, H, W, pad);
  for (size_t co = 0; co < Co; ++co)
    for (size_t ci = 0; ci < Ci; ++ci) {
      const double* plane = xp.data() + ci * Hp * Wp;
      for (size_t ky = 0; ky < 3; ++ky)
        for (size_t kx = 0; kx < 3; ++kx) {
          double acc = 0.0;
          for (size_t oy = 0; oy < Ho; ++oy) {
            const double* grow = gy + (co * Ho + oy) * Wo;
            const double* xrow = plane + (oy * stride + ky) * Wp + kx;
            for (size_t ox = 0; ox < Wo; ++ox) acc += grow[ox] * xrow[ox * stride];
          }
          gw[((co * Ci + ci) * 3 + ky) * 3 + kx] = acc;
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",
      s_add, s_sub, s_mul, s_scale, s_add_scalar, s_axpy, s_relu, s_relu_bwd,
      s_sgd_update,
      s_gemm_nn, s_gemm_tn, s_gemm_nt,
      s_conv3x3, s_conv3x3_bwd_input, s_conv3x3_bwd_weight,
  };
  return t;
}

}  // namespace blendnet::kern
