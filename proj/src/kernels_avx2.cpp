#include "blendnet/kernels.hpp"

#ifdef BLENDNET_BUILD_AVX2

#include <immintrin.h>

#include <vector>

#include "kernels_common.hpp"

// AVX2 backend. Vectorisation is always across independent output elements;
// reductions keep their scalar order per element, and mul/add stay separate
// (no FMA), so results are bit-identical to the scalar backend.

namespace blendnet::kern {
namespace {

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

void v_add(const double* a, const double* b, double* y, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* y, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* y, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void v_scale(double c, const double* x, double* y, size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(vc, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = c * x[i];
}

void v_add_scalar(double c, const double* x, double* y, size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(x + i), vc));
  for (; i < n; ++i) y[i] = x[i] + c;
}

void v_axpy(double c, const double* x, double* y, size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(vc, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) y[i] += c * x[i];
}

void v_relu(const double* x, double* y, size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_bwd(const double* x, const double* gy, double* gx, size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(gx + i, _mm256_and_pd(mask, _mm256_loadu_pd(gy + i)));
  }
  for (; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

void v_sgd_update(double* p, double* v, const double* g, double lr, double momentum, size_t n) {
  const __m256d vm = _mm256_set1_pd(momentum);
  const __m256d vlr = _mm256_set1_pd(lr);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vel = _mm256_add_pd(_mm256_mul_pd(vm, _mm256_loadu_pd(v + i)), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(v + i, vel);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_mul_pd(vlr, vel)));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

// ---------------------------------------------------------------------------
// dense products
// ---------------------------------------------------------------------------

// C row accumulated in memory, k outermost: element (m,n) still sums k
// ascending, matching the scalar per-element accumulator.
void nn_rows(size_t M, size_t K, size_t N, const double* A, const double* B, double* C,
             size_t lda_k /* stride between consecutive k for row m */, bool a_transposed) {
  for (size_t m = 0; m < M; ++m) {
    double* crow = C + m * N;
    for (size_t n = 0; n < N; ++n) crow[n] = 0.0;
    for (size_t k = 0; k < K; ++k) {
      const double a = a_transposed ? A[k * lda_k + m] : A[m * lda_k + k];
      const __m256d va = _mm256_set1_pd(a);
      const double* brow = B + k * N;
      size_t n = 0;
      for (; n + 4 <= N; n += 4) {
        __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(brow + n));
        _mm256_storeu_pd(crow + n, _mm256_add_pd(_mm256_loadu_pd(crow + n), t));
      }
      for (; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

void v_gemm_nn(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  nn_rows(M, K, N, A, B, C, K, false);
}

void v_gemm_tn(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  nn_rows(M, K, N, A, B, C, M, true);
}

void v_gemm_nt(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  auto bt = detail::transpose(B, N, K);  // [K,N]
  nn_rows(M, K, N, A, bt.data(), C, K, false);
}

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1 (stride 2 falls back to the scalar kernels;
// it only appears in the cheap downsampling layers)
// ---------------------------------------------------------------------------

void conv3x3_s1(const double* xp, const double* w, double* y,
                size_t Ci, size_t Hp, size_t Wp, size_t Co, size_t Ho, size_t Wo) {
  for (size_t co = 0; co < Co; ++co) {
    const double* wc = w + co * Ci * 9;
    for (size_t oy = 0; oy < Ho; ++oy) {
      double* yrow = y + (co * Ho + oy) * Wo;
      size_t ox = 0;
      for (; ox + 8 <= Wo; ox += 8) {
        __m256d acc0 = _mm256_setzero_pd();
        __m256d acc1 = _mm256_setzero_pd();
        for (size_t ci = 0; ci < Ci; ++ci) {
          const double* plane = xp + ci * Hp * Wp;
          const double* wk = wc + ci * 9;
          for (size_t ky = 0; ky < 3; ++ky) {
            const double* row = plane + (oy + ky) * Wp + ox;
            for (size_t kx = 0; kx < 3; ++kx) {
              const __m256d vw = _mm256_set1_pd(wk[ky * 3 + kx]);
              acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(vw, _mm256_loadu_pd(row + kx)));
              acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(vw, _mm256_loadu_pd(row + kx + 4)));
            }
          }
        }
        _mm256_storeu_pd(yrow + ox, acc0);
        _mm256_storeu_pd(yrow + ox + 4, acc1);
      }
      for (; ox + 4 <= Wo; ox += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (size_t ci = 0; ci < Ci; ++ci) {
          const double* plane = xp + ci * Hp * Wp;
          const double* wk = wc + ci * 9;
          for (size_t ky = 0; ky < 3; ++ky) {
            const double* row = plane + (oy + ky) * Wp + ox;
            for (size_t kx = 0; kx < 3; ++kx) {
              const __m256d vw = _mm256_set1_pd(wk[ky * 3 + kx]);
              acc = _mm256_add_pd(acc, _mm256_mul_pd(vw, _mm256_loadu_pd(row + kx)));
            }
          }
        }
        _mm256_storeu_pd(yrow + ox, acc);
      }
      for (; ox < Wo; ++ox) {
        double acc = 0.0;
        for (size_t ci = 0; ci < Ci; ++ci) {
          const double* plane = xp + ci * Hp * Wp;
          const double* wk = wc + ci * 9;
          for (size_t ky = 0; ky < 3; ++ky) {
            const double* row = plane + (oy + ky) * Wp + ox;
            for (size_t kx = 0; kx < 3; ++kx) acc += wk[ky * 3 + kx] * row[kx];
          }
        }
        yrow[ox] = acc;
      }
    }
  }
}

void v_conv3x3(const double* x, const double* w, double* y,
               size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad) {
  if (stride != 1) {
    scalar_table().conv3x3(x, w, y, Ci, H, W, Co, stride, pad);
    return;
  }
  auto xp = detail::pad_planes(x, Ci, H, W, pad);
  conv3x3_s1(xp.data(), w, y, Ci, H + 2 * pad, W + 2 * pad, Co,
             conv_out_dim(H, pad, 1), conv_out_dim(W, pad, 1));
}

void v_conv3x3_bwd_input(const double* w, const double* gy, double* gx,
                         size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad) {
  auto plan = detail::bwd_input_plan(w, gy, Ci, H, W, Co, stride, pad);
  conv3x3_s1(plan.taps.data(), plan.weights.data(), gx, Co, H + 2, W + 2, Ci, H, W);
}

void v_conv3x3_bwd_weight(const double* x, const double* gy, double* gw,
                          size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad) {
  const size_t Ho = conv_out_dim(H, pad, stride), Wo = conv_out_dim(W, pad, stride);
  const size_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  auto xp = detail::pad_planes(x, Ci, H, W, pad);
  auto gt = detail::transpose(gy, Co, Ho * Wo);  // [Ho*Wo, Co]
  std::vector<double> gwt(Ci * 9 * Co, 0.0);     // [ci*9+k, co]
  for (size_t ci = 0; ci < Ci; ++ci) {
    const double* plane = xp.data() + ci * Hp * Wp;
    for (size_t ky = 0; ky < 3; ++ky)
      for (size_t kx = 0; kx < 3; ++kx) {
        double* dst = gwt.data() + (ci * 9 + ky * 3 + kx) * Co;
        for (size_t oy = 0; oy < Ho; ++oy) {
          const double* xrow = plane + (oy * stride + ky) * Wp + kx;
          for (size_t ox = 0; ox < Wo; ++ox) {
            const __m256d vx = _mm256_set1_pd(xrow[ox * stride]);
            const double* grow = gt.data() + (oy * Wo + ox) * Co;
            size_t co = 0;
            for (; co + 4 <= Co; co += 4) {
              __m256d t = _mm256_mul_pd(vx, _mm256_loadu_pd(grow + co));
              _mm256_storeu_pd(dst + co, _mm256_add_pd(_mm256_loadu_pd(dst + co), t));
            }
            for (; co < Co; ++co) dst[co] += xrow[ox * stride] * grow[co];
          }
        }
      }
  }
  for (size_t co = 0; co < Co; ++co)
    for (size_t ci = 0; ci < Ci; ++ci)
      for (size_t k = 0; k < 9; ++k) gw[(co * Ci + ci) * 9 + k] = gwt[(ci * 9 + k) * Co + co];
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable t = {
      "avx2",
      v_add, v_sub, v_mul, v_scale, v_add_scalar, v_axpy, v_relu, v_relu_bwd,
      v_sgd_update,
      v_gemm_nn, v_gemm_tn, v_gemm_nt,
      v_conv3x3, v_conv3x3_bwd_input, v_conv3x3_bwd_weight,
  };
  return &t;
}

}  // namespace blendnet::kern

#endif  // BLENDNET_BUILD_AVX2
