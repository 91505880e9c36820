#pragma once

#include <cstddef>
#include <string>

namespace blendnet::kern {

// ============================================================================
// Kernel dispatch table
// ============================================================================
//
// Every numeric hot loop lives behind this table. There is always a scalar
// reference implementation; on x86 an AVX2 variant is compiled in and picked
// at runtime when the CPU supports it (override with BLENDNET_SIMD=scalar or
// =avx2, or programmatically via set_backend).
//
// Bit-exactness contract: for identical inputs, every backend must produce
// bit-identical outputs. To make that possible each kernel's documentation
// pins the accumulation order per output element; SIMD variants vectorise
// across independent output elements, never across a reduction, and use no
// FMA (separate mul and add, matching the scalar rounding sequence). The
// 3x3 convolutions read from an internally zero-padded copy of the input,
// in both backends, so border handling contributes the same term sequence.
//
// All "fresh" outputs are fully overwritten; only axpy/sgd_update update in
// place. Buffers never alias unless stated.
// ============================================================================

struct KernelTable {
  const char* name;

  // ---- elementwise, length n ----
  void (*add)(const double* a, const double* b, double* y, size_t n);       // y = a + b
  void (*sub)(const double* a, const double* b, double* y, size_t n);       // y = a - b
  void (*mul)(const double* a, const double* b, double* y, size_t n);       // y = a * b
  void (*scale)(double c, const double* x, double* y, size_t n);            // y = c * x
  void (*add_scalar)(double c, const double* x, double* y, size_t n);       // y = x + c
  void (*axpy)(double c, const double* x, double* y, size_t n);             // y += c * x
  void (*relu)(const double* x, double* y, size_t n);                       // y = max(x, 0)
  void (*relu_bwd)(const double* x, const double* gy, double* gx, size_t n);// gx = x > 0 ? gy : 0

  // ---- optimiser update, in place ----
  // v = momentum * v + g; p -= lr * v
  void (*sgd_update)(double* p, double* v, const double* g, double lr, double momentum, size_t n);

  // ---- small dense products ----
  // C[M,N] = A[M,K] * B[K,N]; element (m,n) accumulates over k ascending.
  void (*gemm_nn)(size_t M, size_t K, size_t N, const double* A, const double* B, double* C);
  // C[M,N] = A^T * B with A stored [K,M]; element order: k ascending.
  void (*gemm_tn)(size_t M, size_t K, size_t N, const double* A, const double* B, double* C);
  // C[M,N] = A * B^T with B stored [N,K]; element order: k ascending.
  void (*gemm_nt)(size_t M, size_t K, size_t N, const double* A, const double* B, double* C);

  // ---- 3x3 convolution family ----
  // x: [Ci,H,W], w: [Co,Ci,3,3], y: [Co,Ho,Wo] with
  //   Ho = (H + 2*pad - 3)/stride + 1, likewise Wo.
  // Element (co,oy,ox) accumulates over (ci,ky,kx) ascending, padded zeros
  // included as real terms.
  void (*conv3x3)(const double* x, const double* w, double* y,
                  size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad);
  // gx[Ci,H,W] from gy[Co,Ho,Wo]; element (ci,iy,ix) accumulates over
  // (co,ky,kx) ascending.
  void (*conv3x3_bwd_input)(const double* w, const double* gy, double* gx,
                            size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad);
  // gw[Co,Ci,3,3]; element accumulates over (oy,ox) ascending, padded zeros
  // included.
  void (*conv3x3_bwd_weight)(const double* x, const double* gy, double* gw,
                             size_t Ci, size_t H, size_t W, size_t Co, size_t stride, size_t pad);
};

enum class Backend { Auto, Scalar, Avx2 };

const KernelTable& scalar_table();
// Null when the build or the CPU lacks AVX2.
const KernelTable* avx2_table();

// Active table, resolved once (env BLENDNET_SIMD honoured) unless overridden.
const KernelTable& active();
// Throws if the requested backend is unavailable.
void set_backend(Backend b);

inline size_t conv_out_dim(size_t in, size_t pad, size_t stride) {
  return (in + 2 * pad - 3) / stride + 1;
}

}  // namespace blendnet::kern
