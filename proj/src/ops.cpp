#include "blendnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "blendnet/kernels.hpp"

namespace blendnet {

namespace {

using detail::accumulate_grad;

bool grad_wanted(std::initializer_list<const Tensor*> ins) {
  if (!Tape::current()) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

#ifndef NDEBUG
void debug_check_finite(const Tensor& t, const char* op) {
  for (double v : t.values())
    if (!std::isfinite(v)) fail(op, ": non-finite value in output");
}
#define BN_CHECK_FINITE(t, op) debug_check_finite(t, op)
#else
#define BN_CHECK_FINITE(t, op) ((void)0)
#endif

size_t trailing_numel(const std::vector<size_t>& shape, size_t from) {
  size_t n = 1;
  for (size_t i = from; i < shape.size(); ++i) n *= shape[i];
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// linear maps
// ---------------------------------------------------------------------------

Tensor conv1x1(const Tensor& x, const Tensor& w) {
  check(x.ndim() >= 2, "conv1x1: input must have a channel axis plus positions, got shape ",
        shape_str(x.shape()));
  check(w.ndim() == 2, "conv1x1: weight must be [C_out,C_in], got shape ", shape_str(w.shape()));
  const size_t C = x.dim(0), N = trailing_numel(x.shape(), 1);
  const size_t Co = w.dim(0);
  check(w.dim(1) == C, "conv1x1: input channels ", C, " do not match weight in-channels ",
        w.dim(1), "; input shape ", shape_str(x.shape()), ", weight shape ", shape_str(w.shape()));

  std::vector<size_t> out_shape = x.shape();
  out_shape[0] = Co;
  Tensor out = Tensor::zeros(out_shape);
  kern::active().gemm_nn(Co, C, N, w.data(), x.data(), out.data());
  BN_CHECK_FINITE(out, "conv1x1");

  if (grad_wanted({&x, &w})) {
    out.set_requires_grad(true);
    auto xi = x.impl, wi = w.impl, oi = out.impl;
    Tape::current()->record([xi, wi, oi, C, N, Co] {
      if (oi->grad.empty()) return;
      const double* gy = oi->grad.data();
      if (wi->requires_grad) {
        std::vector<double> gw(Co * C);
        kern::active().gemm_nt(Co, N, C, gy, xi->val.data(), gw.data());
        accumulate_grad(*wi, gw.data(), gw.size());
      }
      if (xi->requires_grad) {
        std::vector<double> gx(C * N);
        kern::active().gemm_tn(C, Co, N, wi->val.data(), gy, gx.data());
        accumulate_grad(*xi, gx.data(), gx.size());
      }
    });
  }
  return out;
}

Tensor conv3x3(const Tensor& x, const Tensor& w, size_t stride, size_t pad) {
  check(x.ndim() == 3, "conv3x3: input must be [C,H,W], got shape ", shape_str(x.shape()));
  check(w.ndim() == 4 && w.dim(2) == 3 && w.dim(3) == 3,
        "conv3x3: weight must be [C_out,C_in,3,3], got shape ", shape_str(w.shape()));
  check(stride == 1 || stride == 2, "conv3x3: unsupported stride ", stride);
  check(pad <= 1, "conv3x3: unsupported pad ", pad);
  const size_t Ci = x.dim(0), H = x.dim(1), W = x.dim(2), Co = w.dim(0);
  check(w.dim(1) == Ci, "conv3x3: input channels ", Ci, " do not match weight in-channels ",
        w.dim(1), "; input shape ", shape_str(x.shape()), ", weight shape ", shape_str(w.shape()));
  check(H + 2 * pad >= 3 && W + 2 * pad >= 3, "conv3x3: spatial extent ", H, "x", W, " with pad ",
        pad, " is smaller than the kernel");

  const size_t Ho = kern::conv_out_dim(H, pad, stride), Wo = kern::conv_out_dim(W, pad, stride);
  Tensor out = Tensor::zeros({Co, Ho, Wo});
  kern::active().conv3x3(x.data(), w.data(), out.data(), Ci, H, W, Co, stride, pad);
  BN_CHECK_FINITE(out, "conv3x3");

  if (grad_wanted({&x, &w})) {
    out.set_requires_grad(true);
    auto xi = x.impl, wi = w.impl, oi = out.impl;
    Tape::current()->record([xi, wi, oi, Ci, H, W, Co, stride, pad] {
      if (oi->grad.empty()) return;
      const double* gy = oi->grad.data();
      if (wi->requires_grad) {
        std::vector<double> gw(Co * Ci * 9);
        kern::active().conv3x3_bwd_weight(xi->val.data(), gy, gw.data(), Ci, H, W, Co, stride, pad);
        accumulate_grad(*wi, gw.data(), gw.size());
      }
      if (xi->requires_grad) {
        std::vector<double> gx(Ci * H * W);
        kern::active().conv3x3_bwd_input(wi->val.data(), gy, gx.data(), Ci, H, W, Co, stride, pad);
        accumulate_grad(*xi, gx.data(), gx.size());
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.ndim() == 2 && b.ndim() == 2, "matmul: expects rank-2 operands, got ",
        shape_str(a.shape()), " and ", shape_str(b.shape()));
  const size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  check(b.dim(0) == K, "matmul: inner dimensions disagree: ", shape_str(a.shape()), " x ",
        shape_str(b.shape()));

  Tensor out = Tensor::zeros({M, N});
  kern::active().gemm_nn(M, K, N, a.data(), b.data(), out.data());
  BN_CHECK_FINITE(out, "matmul");

  if (grad_wanted({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    Tape::current()->record([ai, bi, oi, M, K, N] {
      if (oi->grad.empty()) return;
      const double* gy = oi->grad.data();
      if (ai->requires_grad) {
        std::vector<double> ga(M * K);
        kern::active().gemm_nt(M, N, K, gy, bi->val.data(), ga.data());
        accumulate_grad(*ai, ga.data(), ga.size());
      }
      if (bi->requires_grad) {
        std::vector<double> gb(K * N);
        kern::active().gemm_tn(K, M, N, ai->val.data(), gy, gb.data());
        accumulate_grad(*bi, gb.data(), gb.size());
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kern::active().relu(x.data(), out.data(), x.numel());

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi] {
      if (oi->grad.empty()) return;
      std::vector<double> gx(xi->val.size());
      kern::active().relu_bwd(xi->val.data(), oi->grad.data(), gx.data(), gx.size());
      accumulate_grad(*xi, gx.data(), gx.size());
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (size_t i = 0; i < x.numel(); ++i) ov[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  BN_CHECK_FINITE(out, "sigmoid");

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi] {
      if (oi->grad.empty()) return;
      std::vector<double> gx(xi->val.size());
      for (size_t i = 0; i < gx.size(); ++i) {
        const double s = oi->val[i];
        gx[i] = oi->grad[i] * s * (1.0 - s);
      }
      accumulate_grad(*xi, gx.data(), gx.size());
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, size_t axis) {
  check(axis < x.ndim(), "softmax: axis ", axis, " out of range for shape ", shape_str(x.shape()));
  const size_t L = x.dim(axis);
  check(L > 0, "softmax: empty axis ", axis, " in shape ", shape_str(x.shape()));
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);

  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (size_t o = 0; o < outer; ++o)
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * L * inner + in;
      double mx = xv[base];
      for (size_t l = 1; l < L; ++l) mx = std::max(mx, xv[base + l * inner]);
      double sum = 0.0;
      for (size_t l = 0; l < L; ++l) {
        const double e = std::exp(xv[base + l * inner] - mx);
        ov[base + l * inner] = e;
        sum += e;
      }
      for (size_t l = 0; l < L; ++l) ov[base + l * inner] /= sum;
    }
  BN_CHECK_FINITE(out, "softmax");

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi, outer, L, inner] {
      if (oi->grad.empty()) return;
      std::vector<double> gx(xi->val.size());
      for (size_t o = 0; o < outer; ++o)
        for (size_t in = 0; in < inner; ++in) {
          const size_t base = o * L * inner + in;
          double dot = 0.0;
          for (size_t l = 0; l < L; ++l)
            dot += oi->grad[base + l * inner] * oi->val[base + l * inner];
          for (size_t l = 0; l < L; ++l) {
            const size_t k = base + l * inner;
            gx[k] = (oi->grad[k] - dot) * oi->val[k];
          }
        }
      accumulate_grad(*xi, gx.data(), gx.size());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(), op, ": shape mismatch ", shape_str(a.shape()), " vs ",
        shape_str(b.shape()));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  kern::active().add(a.data(), b.data(), out.data(), a.numel());

  if (grad_wanted({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    Tape::current()->record([ai, bi, oi] {
      if (oi->grad.empty()) return;
      if (ai->requires_grad) accumulate_grad(*ai, oi->grad.data(), oi->grad.size());
      if (bi->requires_grad) accumulate_grad(*bi, oi->grad.data(), oi->grad.size());
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  kern::active().sub(a.data(), b.data(), out.data(), a.numel());

  if (grad_wanted({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    Tape::current()->record([ai, bi, oi] {
      if (oi->grad.empty()) return;
      if (ai->requires_grad) accumulate_grad(*ai, oi->grad.data(), oi->grad.size());
      if (bi->requires_grad) {
        std::vector<double> neg(oi->grad.size());
        kern::active().scale(-1.0, oi->grad.data(), neg.data(), neg.size());
        accumulate_grad(*bi, neg.data(), neg.size());
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  kern::active().mul(a.data(), b.data(), out.data(), a.numel());

  if (grad_wanted({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl, bi = b.impl, oi = out.impl;
    Tape::current()->record([ai, bi, oi] {
      if (oi->grad.empty()) return;
      std::vector<double> g(oi->grad.size());
      if (ai->requires_grad) {
        kern::active().mul(oi->grad.data(), bi->val.data(), g.data(), g.size());
        accumulate_grad(*ai, g.data(), g.size());
      }
      if (bi->requires_grad) {
        kern::active().mul(oi->grad.data(), ai->val.data(), g.data(), g.size());
        accumulate_grad(*bi, g.data(), g.size());
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  kern::active().scale(c, x.data(), out.data(), x.numel());

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi, c] {
      if (oi->grad.empty()) return;
      std::vector<double> g(oi->grad.size());
      kern::active().scale(c, oi->grad.data(), g.data(), g.size());
      accumulate_grad(*xi, g.data(), g.size());
    });
  }
  return out;
}

Tensor add_n(const std::vector<Tensor>& xs) {
  check(!xs.empty(), "add_n: empty input list");
  for (const Tensor& t : xs) check_same_shape(xs[0], t, "add_n");
  Tensor out = Tensor::zeros(xs[0].shape());
  std::memcpy(out.data(), xs[0].data(), out.numel() * sizeof(double));
  for (size_t i = 1; i < xs.size(); ++i)
    kern::active().add(out.data(), xs[i].data(), out.data(), out.numel());

  bool wanted = false;
  for (const Tensor& t : xs) wanted = wanted || t.requires_grad();
  if (Tape::current() && wanted) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> ins;
    ins.reserve(xs.size());
    for (const Tensor& t : xs) ins.push_back(t.impl);
    auto oi = out.impl;
    Tape::current()->record([ins, oi] {
      if (oi->grad.empty()) return;
      for (const auto& xi : ins)
        if (xi->requires_grad) accumulate_grad(*xi, oi->grad.data(), oi->grad.size());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// broadcasts and reductions
// ---------------------------------------------------------------------------

namespace {
void check_broadcast(const Tensor& x, const Tensor& v, const char* op) {
  check(x.ndim() >= 1 && v.ndim() == 1, op, ": expects x [C,...] and v [C], got ",
        shape_str(x.shape()), " and ", shape_str(v.shape()));
  check(x.dim(0) == v.dim(0), op, ": leading axis ", x.dim(0), " does not match vector length ",
        v.dim(0), " (x ", shape_str(x.shape()), ", v ", shape_str(v.shape()), ")");
}
}  // namespace

Tensor broadcast_add(const Tensor& x, const Tensor& v) {
  check_broadcast(x, v, "broadcast_add");
  const size_t C = x.dim(0), N = trailing_numel(x.shape(), 1);
  Tensor out = Tensor::zeros(x.shape());
  for (size_t c = 0; c < C; ++c)
    kern::active().add_scalar(v.data()[c], x.data() + c * N, out.data() + c * N, N);

  if (grad_wanted({&x, &v})) {
    out.set_requires_grad(true);
    auto xi = x.impl, vi = v.impl, oi = out.impl;
    Tape::current()->record([xi, vi, oi, C, N] {
      if (oi->grad.empty()) return;
      if (xi->requires_grad) accumulate_grad(*xi, oi->grad.data(), oi->grad.size());
      if (vi->requires_grad) {
        std::vector<double> gv(C, 0.0);
        for (size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          const double* g = oi->grad.data() + c * N;
          for (size_t i = 0; i < N; ++i) acc += g[i];
          gv[c] = acc;
        }
        accumulate_grad(*vi, gv.data(), C);
      }
    });
  }
  return out;
}

Tensor broadcast_mul(const Tensor& x, const Tensor& v) {
  check_broadcast(x, v, "broadcast_mul");
  const size_t C = x.dim(0), N = trailing_numel(x.shape(), 1);
  Tensor out = Tensor::zeros(x.shape());
  for (size_t c = 0; c < C; ++c)
    kern::active().scale(v.data()[c], x.data() + c * N, out.data() + c * N, N);

  if (grad_wanted({&x, &v})) {
    out.set_requires_grad(true);
    auto xi = x.impl, vi = v.impl, oi = out.impl;
    Tape::current()->record([xi, vi, oi, C, N] {
      if (oi->grad.empty()) return;
      if (xi->requires_grad) {
        std::vector<double> gx(oi->grad.size());
        for (size_t c = 0; c < C; ++c)
          kern::active().scale(vi->val[c], oi->grad.data() + c * N, gx.data() + c * N, N);
        accumulate_grad(*xi, gx.data(), gx.size());
      }
      if (vi->requires_grad) {
        std::vector<double> gv(C, 0.0);
        for (size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          const double* g = oi->grad.data() + c * N;
          const double* xv = xi->val.data() + c * N;
          for (size_t i = 0; i < N; ++i) acc += g[i] * xv[i];
          gv[c] = acc;
        }
        accumulate_grad(*vi, gv.data(), C);
      }
    });
  }
  return out;
}

Tensor mean_over(const Tensor& x, std::vector<size_t> axes) {
  check(!axes.empty(), "mean_over: no axes given");
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  for (size_t a : axes)
    check(a < x.ndim(), "mean_over: axis ", a, " out of range for shape ", shape_str(x.shape()));

  std::vector<bool> reduced(x.ndim(), false);
  for (size_t a : axes) reduced[a] = true;
  std::vector<size_t> out_shape;
  for (size_t i = 0; i < x.ndim(); ++i)
    if (!reduced[i]) out_shape.push_back(x.dim(i));

  size_t count = 1;
  for (size_t a : axes) count *= x.dim(a);
  check(count > 0, "mean_over: reducing over an empty extent in shape ", shape_str(x.shape()));

  // Flat index -> output index map factor per axis.
  const size_t nd = x.ndim();
  std::vector<size_t> in_stride(nd, 1), out_stride(nd, 0);
  for (size_t i = nd; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  {
    size_t s = 1;
    for (size_t i = nd; i-- > 0;)
      if (!reduced[i]) {
        out_stride[i] = s;
        s *= x.dim(i);
      }
  }

  Tensor out = Tensor::zeros(out_shape);
  const double* xv = x.data();
  double* ov = out.data();
  const size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) {
    size_t rem = i, oidx = 0;
    for (size_t d = 0; d < nd; ++d) {
      const size_t c = rem / in_stride[d];
      rem %= in_stride[d];
      oidx += out_stride[d] * (reduced[d] ? 0 : c);
    }
    ov[oidx] += xv[i];
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (size_t i = 0; i < out.numel(); ++i) ov[i] *= inv;

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi, in_stride, out_stride, reduced, inv, nd, n] {
      if (oi->grad.empty()) return;
      std::vector<double> gx(n);
      for (size_t i = 0; i < n; ++i) {
        size_t rem = i, oidx = 0;
        for (size_t d = 0; d < nd; ++d) {
          const size_t c = rem / in_stride[d];
          rem %= in_stride[d];
          oidx += out_stride[d] * (reduced[d] ? 0 : c);
        }
        gx[i] = oi->grad[oidx] * inv;
      }
      accumulate_grad(*xi, gx.data(), n);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<size_t> new_shape) {
  size_t n = 1;
  for (size_t d : new_shape) n *= d;
  check(n == x.numel(), "reshape: cannot view ", shape_str(x.shape()), " as ",
        shape_str(new_shape));
  Tensor out = Tensor::from_data(std::move(new_shape), x.values());

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi] {
      if (oi->grad.empty()) return;
      accumulate_grad(*xi, oi->grad.data(), oi->grad.size());
    });
  }
  return out;
}

Tensor stack0(const std::vector<Tensor>& xs) {
  check(!xs.empty(), "stack0: empty input list");
  for (const Tensor& t : xs)
    check(t.shape() == xs[0].shape(), "stack0: mismatched shapes ", shape_str(xs[0].shape()),
          " vs ", shape_str(t.shape()));
  const size_t k = xs.size(), m = xs[0].numel();
  std::vector<size_t> out_shape;
  out_shape.push_back(k);
  for (size_t d : xs[0].shape()) out_shape.push_back(d);

  Tensor out = Tensor::zeros(out_shape);
  for (size_t i = 0; i < k; ++i)
    std::memcpy(out.data() + i * m, xs[i].data(), m * sizeof(double));

  bool wanted = false;
  for (const Tensor& t : xs) wanted = wanted || t.requires_grad();
  if (Tape::current() && wanted) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> ins;
    for (const Tensor& t : xs) ins.push_back(t.impl);
    auto oi = out.impl;
    Tape::current()->record([ins, oi, m] {
      if (oi->grad.empty()) return;
      for (size_t i = 0; i < ins.size(); ++i)
        if (ins[i]->requires_grad) accumulate_grad(*ins[i], oi->grad.data() + i * m, m);
    });
  }
  return out;
}

Tensor take0(const Tensor& x, size_t i) {
  check(x.ndim() >= 1, "take0: scalar input");
  check(i < x.dim(0), "take0: row ", i, " out of range for shape ", shape_str(x.shape()));
  const size_t m = x.numel() / x.dim(0);
  std::vector<size_t> out_shape(x.shape().begin() + 1, x.shape().end());
  Tensor out = Tensor::zeros(out_shape);
  std::memcpy(out.data(), x.data() + i * m, m * sizeof(double));

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi, i, m] {
      if (oi->grad.empty()) return;
      if (xi->grad.empty()) xi->grad.assign(xi->val.size(), 0.0);
      kern::active().axpy(1.0, oi->grad.data(), xi->grad.data() + i * m, m);
    });
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, size_t Ht, size_t Wt) {
  check(x.ndim() == 3, "upsample_nearest: input must be [C,H,W], got ", shape_str(x.shape()));
  check(Ht >= 1 && Wt >= 1, "upsample_nearest: empty target ", Ht, "x", Wt);
  const size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);

  std::vector<size_t> sy(Ht), sx(Wt);
  for (size_t t = 0; t < Ht; ++t) sy[t] = t * H / Ht;
  for (size_t t = 0; t < Wt; ++t) sx[t] = t * W / Wt;

  Tensor out = Tensor::zeros({C, Ht, Wt});
  const double* xv = x.data();
  double* ov = out.data();
  for (size_t c = 0; c < C; ++c)
    for (size_t ty = 0; ty < Ht; ++ty) {
      const double* row = xv + (c * H + sy[ty]) * W;
      double* orow = ov + (c * Ht + ty) * Wt;
      for (size_t tx = 0; tx < Wt; ++tx) orow[tx] = row[sx[tx]];
    }

  if (grad_wanted({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl, oi = out.impl;
    Tape::current()->record([xi, oi, C, H, W, Ht, Wt, sy, sx] {
      if (oi->grad.empty()) return;
      std::vector<double> gx(C * H * W, 0.0);
      for (size_t c = 0; c < C; ++c)
        for (size_t ty = 0; ty < Ht; ++ty) {
          double* grow = gx.data() + (c * H + sy[ty]) * W;
          const double* orow = oi->grad.data() + (c * Ht + ty) * Wt;
          for (size_t tx = 0; tx < Wt; ++tx) grow[sx[tx]] += orow[tx];
        }
      accumulate_grad(*xi, gx.data(), gx.size());
    });
  }
  return out;
}

Tensor stop_gradient(const Tensor& x) {
  return Tensor::from_data(x.shape(), x.values(), false);
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

namespace {
constexpr double kProbClamp = 1e-12;
double clamped_log(double p) {
  return std::log(std::clamp(p, kProbClamp, 1.0 - kProbClamp));
}
}  // namespace

Tensor focal_loss(const Tensor& logits, const std::vector<int8_t>& target,
                  double alpha, double gamma, double normalizer) {
  check(target.size() == logits.numel(), "focal_loss: ", target.size(),
        " targets for logits shape ", shape_str(logits.shape()));
  check(normalizer > 0.0, "focal_loss: normalizer must be positive, got ", normalizer);

  const double* z = logits.data();
  const size_t n = logits.numel();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (target[i] < 0) continue;
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    if (target[i] > 0) {
      total += -alpha * std::pow(1.0 - s, gamma) * clamped_log(s);
    } else {
      total += -(1.0 - alpha) * std::pow(s, gamma) * clamped_log(1.0 - s);
    }
  }
  Tensor out = Tensor::scalar_value(total / normalizer);
  BN_CHECK_FINITE(out, "focal_loss");

  if (grad_wanted({&logits})) {
    out.set_requires_grad(true);
    auto li = logits.impl, oi = out.impl;
    Tape::current()->record([li, oi, target, alpha, gamma, normalizer, n] {
      if (oi->grad.empty()) return;
      const double go = oi->grad[0] / normalizer;
      std::vector<double> gz(n, 0.0);
      for (size_t i = 0; i < n; ++i) {
        if (target[i] < 0) continue;
        const double s = 1.0 / (1.0 + std::exp(-li->val[i]));
        if (target[i] > 0) {
          gz[i] = go * alpha * std::pow(1.0 - s, gamma) *
                  (gamma * s * clamped_log(s) - (1.0 - s));
        } else {
          gz[i] = go * (1.0 - alpha) * std::pow(s, gamma) *
                  (s - gamma * (1.0 - s) * clamped_log(1.0 - s));
        }
      }
      accumulate_grad(*li, gz.data(), n);
    });
  }
  return out;
}

Tensor smooth_l1_loss(const Tensor& pred, const std::vector<double>& target,
                      const std::vector<uint8_t>& mask, double beta, double normalizer) {
  check(target.size() == pred.numel() && mask.size() == pred.numel(),
        "smooth_l1_loss: target/mask sizes ", target.size(), "/", mask.size(),
        " for pred shape ", shape_str(pred.shape()));
  check(beta > 0.0, "smooth_l1_loss: beta must be positive, got ", beta);
  check(normalizer > 0.0, "smooth_l1_loss: normalizer must be positive, got ", normalizer);

  const double* p = pred.data();
  const size_t n = pred.numel();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double d = p[i] - target[i];
    const double ad = std::abs(d);
    total += ad <= beta ? d * d / (2.0 * beta) : ad - 0.5 * beta;
  }
  Tensor out = Tensor::scalar_value(total / normalizer);
  BN_CHECK_FINITE(out, "smooth_l1_loss");

  if (grad_wanted({&pred})) {
    out.set_requires_grad(true);
    auto pi = pred.impl, oi = out.impl;
    Tape::current()->record([pi, oi, target, mask, beta, normalizer, n] {
      if (oi->grad.empty()) return;
      const double go = oi->grad[0] / normalizer;
      std::vector<double> gp(n, 0.0);
      for (size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const double d = pi->val[i] - target[i];
        gp[i] = go * std::clamp(d / beta, -1.0, 1.0);
      }
      accumulate_grad(*pi, gp.data(), n);
    });
  }
  return out;
}

}  // namespace blendnet
