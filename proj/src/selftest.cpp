#include "blendnet/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "blendnet/blend.hpp"
#include "blendnet/checkpoint.hpp"
#include "blendnet/kernels.hpp"
#include "blendnet/ops.hpp"
#include "blendnet/optim.hpp"
#include "blendnet/ref_ops.hpp"
#include "blendnet/rng.hpp"
#include "blendnet/tensor.hpp"

namespace blendnet {
namespace {

struct Harness {
  size_t failures = 0;
  size_t suite_failures = 0;
  std::string suite;

  void begin(const std::string& name) {
    suite = name;
    suite_failures = 0;
  }
  void end(const std::string& note = "") {
    std::printf("[%s] %s%s%s\n", suite_failures ? "FAIL" : " ok ", suite.c_str(),
                note.empty() ? "" : " ", note.c_str());
  }
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      ++failures;
      ++suite_failures;
      std::fprintf(stderr, "  selftest failure in %s: %s\n", suite.c_str(), what.c_str());
    }
  }
  void expect_near(double got, double want, double tol, const std::string& what) {
    double diff = std::fabs(got - want);
    double rel = diff / std::max(1.0, std::fabs(want));
    if (!(rel <= tol)) {
      char buf[196];
      std::snprintf(buf, sizeof buf, "%s: got %.17g want %.17g (rel %.3g)", what.c_str(), got,
                    want, rel);
      expect(false, buf);
    } else {
      expect(true, what);
    }
  }
};

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

// ---------------------------------------------------------------------------
// Suite 1: scalar and AVX2 backends agree bit for bit.
// ---------------------------------------------------------------------------

void suite_kernels(Harness& h, Rng& rng) {
  h.begin("kernel backends bit-identical");
  const kern::KernelTable* simd = kern::avx2_table();
  if (!simd) {
    h.end("(no AVX2 on this machine, scalar only)");
    return;
  }
  const kern::KernelTable& ref = kern::scalar_table();

  for (size_t n : {size_t(1), size_t(3), size_t(8), size_t(17), size_t(255)}) {
    std::vector<double> a = random_vec(rng, n), b = random_vec(rng, n);
    std::vector<double> y1(n), y2(n);
    ref.add(a.data(), b.data(), y1.data(), n);
    simd->add(a.data(), b.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "add n=" + std::to_string(n));
    ref.sub(a.data(), b.data(), y1.data(), n);
    simd->sub(a.data(), b.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "sub n=" + std::to_string(n));
    ref.mul(a.data(), b.data(), y1.data(), n);
    simd->mul(a.data(), b.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "mul n=" + std::to_string(n));
    ref.scale(0.37, a.data(), y1.data(), n);
    simd->scale(0.37, a.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "scale n=" + std::to_string(n));
    ref.add_scalar(-1.25, a.data(), y1.data(), n);
    simd->add_scalar(-1.25, a.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "add_scalar n=" + std::to_string(n));
    ref.relu(a.data(), y1.data(), n);
    simd->relu(a.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "relu n=" + std::to_string(n));
    ref.relu_bwd(a.data(), b.data(), y1.data(), n);
    simd->relu_bwd(a.data(), b.data(), y2.data(), n);
    h.expect(bits_equal(y1, y2), "relu_bwd n=" + std::to_string(n));

    std::vector<double> t1 = b, t2 = b;
    ref.axpy(0.81, a.data(), t1.data(), n);
    simd->axpy(0.81, a.data(), t2.data(), n);
    h.expect(bits_equal(t1, t2), "axpy n=" + std::to_string(n));

    std::vector<double> p1 = a, p2 = a, v1 = b, v2 = b;
    std::vector<double> g = random_vec(rng, n);
    ref.sgd_update(p1.data(), v1.data(), g.data(), 0.01, 0.9, n);
    simd->sgd_update(p2.data(), v2.data(), g.data(), 0.01, 0.9, n);
    h.expect(bits_equal(p1, p2) && bits_equal(v1, v2), "sgd_update n=" + std::to_string(n));
  }

  for (auto [M, K, N] : {std::array<size_t, 3>{1, 1, 1}, std::array<size_t, 3>{3, 5, 7},
                         std::array<size_t, 3>{8, 16, 4}, std::array<size_t, 3>{5, 13, 9}}) {
    std::vector<double> A = random_vec(rng, M * K), B = random_vec(rng, K * N);
    std::vector<double> At = random_vec(rng, K * M), Bt = random_vec(rng, N * K);
    std::vector<double> c1(M * N), c2(M * N);
    std::string dims = std::to_string(M) + "x" + std::to_string(K) + "x" + std::to_string(N);
    ref.gemm_nn(M, K, N, A.data(), B.data(), c1.data());
    simd->gemm_nn(M, K, N, A.data(), B.data(), c2.data());
    h.expect(bits_equal(c1, c2), "gemm_nn " + dims);
    ref.gemm_tn(M, K, N, At.data(), B.data(), c1.data());
    simd->gemm_tn(M, K, N, At.data(), B.data(), c2.data());
    h.expect(bits_equal(c1, c2), "gemm_tn " + dims);
    ref.gemm_nt(M, K, N, A.data(), Bt.data(), c1.data());
    simd->gemm_nt(M, K, N, A.data(), Bt.data(), c2.data());
    h.expect(bits_equal(c1, c2), "gemm_nt " + dims);
  }

  for (size_t stride : {size_t(1), size_t(2)}) {
    for (size_t pad : {size_t(0), size_t(1)}) {
      size_t Ci = 3, Co = 5, H = 7, W = 6;
      if (H + 2 * pad < 3) continue;
      size_t Ho = kern::conv_out_dim(H, pad, stride), Wo = kern::conv_out_dim(W, pad, stride);
      std::vector<double> x = random_vec(rng, Ci * H * W), w = random_vec(rng, Co * Ci * 9);
      std::vector<double> y1(Co * Ho * Wo), y2(Co * Ho * Wo);
      std::string tag = " s" + std::to_string(stride) + " p" + std::to_string(pad);
      ref.conv3x3(x.data(), w.data(), y1.data(), Ci, H, W, Co, stride, pad);
      simd->conv3x3(x.data(), w.data(), y2.data(), Ci, H, W, Co, stride, pad);
      h.expect(bits_equal(y1, y2), "conv3x3" + tag);

      std::vector<double> gy = random_vec(rng, Co * Ho * Wo);
      std::vector<double> gx1(Ci * H * W), gx2(Ci * H * W);
      ref.conv3x3_bwd_input(w.data(), gy.data(), gx1.data(), Ci, H, W, Co, stride, pad);
      simd->conv3x3_bwd_input(w.data(), gy.data(), gx2.data(), Ci, H, W, Co, stride, pad);
      h.expect(bits_equal(gx1, gx2), "conv3x3_bwd_input" + tag);

      std::vector<double> gw1(Co * Ci * 9), gw2(Co * Ci * 9);
      ref.conv3x3_bwd_weight(x.data(), gy.data(), gw1.data(), Ci, H, W, Co, stride, pad);
      simd->conv3x3_bwd_weight(x.data(), gy.data(), gw2.data(), Ci, H, W, Co, stride, pad);
      h.expect(bits_equal(gw1, gw2), "conv3x3_bwd_weight" + tag);
    }
  }
  h.end(std::string("(") + simd->name + " vs " + ref.name + ")");
}

// ---------------------------------------------------------------------------
// Suite 2: op forwards match the naive reference loops.
// ---------------------------------------------------------------------------

void suite_forward_oracles(Harness& h, Rng& rng) {
  h.begin("forward ops match naive references");
  Tape::Pause pause;

  size_t C = 6, H = 5, W = 4, Co = 3;
  Tensor x = Tensor::from_data({C, H, W}, random_vec(rng, C * H * W));
  Tensor w1 = Tensor::from_data({Co, C}, random_vec(rng, Co * C));
  std::vector<double> want = ref::conv1x1(x.values(), C, H * W, w1.values(), Co);
  Tensor got = conv1x1(x, w1);
  for (size_t i = 0; i < want.size(); ++i)
    if (std::fabs(got.values()[i] - want[i]) > 1e-12) {
      h.expect(false, "conv1x1 mismatch at " + std::to_string(i));
      break;
    }

  for (size_t stride : {size_t(1), size_t(2)}) {
    Tensor w3 = Tensor::from_data({Co, C, 3, 3}, random_vec(rng, Co * C * 9));
    std::vector<double> y = ref::conv3x3(x.values(), C, H, W, w3.values(), Co, stride, 1);
    Tensor yt = conv3x3(x, w3, stride, 1);
    bool ok = yt.numel() == y.size();
    for (size_t i = 0; ok && i < y.size(); ++i) ok = std::fabs(yt.values()[i] - y[i]) <= 1e-12;
    h.expect(ok, "conv3x3 stride " + std::to_string(stride));
  }

  size_t M = 4, K = 7, N = 5;
  Tensor a = Tensor::from_data({M, K}, random_vec(rng, M * K));
  Tensor b = Tensor::from_data({K, N}, random_vec(rng, K * N));
  std::vector<double> mm = ref::matmul(a.values(), M, K, b.values(), N);
  Tensor mt = matmul(a, b);
  bool mok = true;
  for (size_t i = 0; i < mm.size(); ++i) mok = mok && std::fabs(mt.values()[i] - mm[i]) <= 1e-12;
  h.expect(mok, "matmul");

  std::vector<double> logits = random_vec(rng, 9, -3.0, 3.0);
  Tensor lt = Tensor::from_data({9}, logits);
  Tensor st = softmax(lt, 0);
  std::vector<double> sref = ref::softmax(logits);
  bool sok = true;
  for (size_t i = 0; i < sref.size(); ++i)
    sok = sok && std::fabs(st.values()[i] - sref[i]) <= 1e-12;
  h.expect(sok, "softmax vs reference");
  h.end();
}

// ---------------------------------------------------------------------------
// Suite 3: finite-difference gradient checks.
// ---------------------------------------------------------------------------

// Scalar loss = sum(out * r) with a fixed random projection r, so every
// output element influences the loss.
double projected_loss(const std::function<Tensor()>& fwd, const std::vector<double>& r) {
  Tape::Pause pause;
  Tensor out = fwd();
  double s = 0.0;
  for (size_t i = 0; i < out.numel(); ++i) s += r[i] * out.values()[i];
  return s;
}

void grad_check(Harness& h, const std::string& name, std::vector<Tensor> leaves,
                const std::function<Tensor()>& fwd, Rng& rng, double eps = 1e-5,
                double tol = 2e-6) {
  Tensor probe;
  {
    Tape::Pause pause;
    probe = fwd();
  }
  std::vector<double> r = random_vec(rng, probe.numel(), 0.2, 1.0);

  for (Tensor& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor out = reshape(fwd(), {probe.numel()});
    Tensor rt = Tensor::from_data({probe.numel()}, r);
    Tensor weighted = mul(out, rt);
    Tensor loss = scale(mean_over(weighted, {0}), static_cast<double>(probe.numel()));
    tape.backward(loss);
  }

  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor& t = leaves[li];
    size_t n = t.numel();
    size_t step = n <= 24 ? 1 : n / 24;
    for (size_t i = 0; i < n; i += step) {
      double saved = t.data()[i];
      t.data()[i] = saved + eps;
      double up = projected_loss(fwd, r);
      t.data()[i] = saved - eps;
      double dn = projected_loss(fwd, r);
      t.data()[i] = saved;
      double fd = (up - dn) / (2.0 * eps);
      double ad = t.grad()[i];
      double denom = std::max({1.0, std::fabs(fd), std::fabs(ad)});
      if (std::fabs(fd - ad) / denom > tol) {
        char buf[196];
        std::snprintf(buf, sizeof buf, "%s leaf %zu idx %zu: fd %.12g vs grad %.12g", name.c_str(),
                      li, i, fd, ad);
        h.expect(false, buf);
        return;
      }
    }
    t.set_requires_grad(false);
  }
  h.expect(true, name);
}

void suite_gradients(Harness& h, Rng& rng) {
  h.begin("finite-difference gradient checks");

  size_t C = 4, H = 5, W = 3;
  auto away_from_zero = [&](size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
      double u = rng.uniform(0.15, 1.0);
      x = rng.bernoulli(0.5) ? u : -u;
    }
    return v;
  };

  {
    Tensor x = Tensor::from_data({C, H, W}, random_vec(rng, C * H * W));
    Tensor w = Tensor::from_data({3, C, 3, 3}, random_vec(rng, 3 * C * 9, -0.5, 0.5));
    grad_check(h, "conv3x3 s1", {x, w}, [=] { return conv3x3(x, w, 1, 1); }, rng);
    grad_check(h, "conv3x3 s2", {x, w}, [=] { return conv3x3(x, w, 2, 1); }, rng);
  }
  {
    Tensor x = Tensor::from_data({C, H, W}, random_vec(rng, C * H * W));
    Tensor w = Tensor::from_data({2, C}, random_vec(rng, 2 * C));
    grad_check(h, "conv1x1", {x, w}, [=] { return conv1x1(x, w); }, rng);
  }
  {
    Tensor a = Tensor::from_data({3, 4}, random_vec(rng, 12));
    Tensor b = Tensor::from_data({4, 5}, random_vec(rng, 20));
    grad_check(h, "matmul", {a, b}, [=] { return matmul(a, b); }, rng);
  }
  {
    Tensor x = Tensor::from_data({2, H, W}, away_from_zero(2 * H * W));
    grad_check(h, "relu", {x}, [=] { return relu(x); }, rng);
    Tensor y = Tensor::from_data({2, H, W}, random_vec(rng, 2 * H * W, -2.0, 2.0));
    grad_check(h, "sigmoid", {y}, [=] { return sigmoid(y); }, rng);
  }
  {
    Tensor x = Tensor::from_data({3, 7}, random_vec(rng, 21, -2.0, 2.0));
    grad_check(h, "softmax axis1", {x}, [=] { return softmax(x, 1); }, rng);
    grad_check(h, "softmax axis0", {x}, [=] { return softmax(x, 0); }, rng);
  }
  {
    Tensor x = Tensor::from_data({C, H, W}, random_vec(rng, C * H * W));
    Tensor v = Tensor::from_data({C}, random_vec(rng, C));
    grad_check(h, "broadcast_add", {x, v}, [=] { return broadcast_add(x, v); }, rng);
    grad_check(h, "broadcast_mul", {x, v}, [=] { return broadcast_mul(x, v); }, rng);
  }
  {
    Tensor x = Tensor::from_data({2, 3, 4}, random_vec(rng, 24));
    grad_check(h, "upsample_nearest", {x}, [=] { return upsample_nearest(x, 6, 8); }, rng);
    grad_check(h, "mean_over", {x}, [=] { return mean_over(x, {1, 2}); }, rng);
  }
  {
    std::vector<int8_t> target = {1, 0, -1, 1, 0, 0};
    Tensor logits = Tensor::from_data({6}, random_vec(rng, 6, -2.5, 2.5));
    grad_check(h, "focal_loss", {logits},
               [=] { return focal_loss(logits, target, 0.25, 2.0, 3.0); }, rng);
  }
  {
    std::vector<double> target = random_vec(rng, 8);
    std::vector<uint8_t> mask = {1, 1, 0, 1, 0, 1, 1, 1};
    // Spread predictions across both smooth-L1 regimes around beta = 1/9.
    Tensor pred = Tensor::from_data({8}, random_vec(rng, 8, -1.5, 1.5));
    grad_check(h, "smooth_l1_loss", {pred},
               [=] { return smooth_l1_loss(pred, target, mask, 1.0 / 9.0, 2.0); }, rng);
  }
  {
    size_t ce = C / 2;
    Rng wr(rng.next_u64());
    ScmWeights scm = ScmWeights::build(C, 2, wr);
    Tensor x = Tensor::from_data({C, H, W}, random_vec(rng, C * H * W));
    grad_check(h, "scm_forward", {x, scm.w1, scm.w2, scm.w3},
               [=] { return scm_forward(x, scm); }, rng);
    (void)ce;
  }
  {
    Rng wr(rng.next_u64());
    TcmWeights tcm = TcmWeights::build(C, 3, wr);
    std::vector<Tensor> frames;
    for (int t = 0; t < 3; ++t)
      frames.push_back(Tensor::from_data({C, H, W}, random_vec(rng, C * H * W)));
    std::vector<Tensor> leaves = frames;
    leaves.push_back(tcm.w4[0]);
    leaves.push_back(tcm.w5[1]);
    leaves.push_back(tcm.w6[2]);
    grad_check(h, "tcm_forward positional", leaves,
               [=] { return tcm_forward(frames, 1, tcm, EmbeddingStrategy::Positional); }, rng);
  }
  h.end();
}

// ---------------------------------------------------------------------------
// Suite 4: blend modules match the equation-level references.
// ---------------------------------------------------------------------------

void suite_blend_oracles(Harness& h, Rng& rng) {
  h.begin("blend modules match references");
  Tape::Pause pause;
  size_t C = 8, H = 3, W = 5, HW = H * W;

  Rng wr(derive_seed(77, "selftest-scm"));
  ScmWeights sw = ScmWeights::build(C, 4, wr);
  Tensor x = Tensor::from_data({C, H, W}, random_vec(rng, C * H * W));
  Tensor z = scm_forward(x, sw);
  std::vector<double> zr = ref::scm(x.values(), C, H, W, sw.w1.values(), sw.w2.values(), C / 4,
                                    sw.w3.values());
  bool ok = z.numel() == zr.size();
  double worst = 0.0;
  for (size_t i = 0; ok && i < zr.size(); ++i) worst = std::max(worst, std::fabs(z.values()[i] - zr[i]));
  h.expect(ok && worst <= 1e-12, "scm_forward vs reference (worst " + std::to_string(worst) + ")");

  size_t T = 3;
  Rng tr(derive_seed(78, "selftest-tcm"));
  TcmWeights tw = TcmWeights::build(C, T, tr);
  std::vector<Tensor> frames;
  std::vector<double> concat;
  for (size_t t = 0; t < T; ++t) {
    frames.push_back(Tensor::from_data({C, H, W}, random_vec(rng, C * H * W)));
    concat.insert(concat.end(), frames.back().values().begin(), frames.back().values().end());
  }
  size_t main_idx = 1;
  std::vector<std::vector<double>> w4(T), w5(T), w6(T);
  for (size_t t = 0; t < T; ++t) {
    int off = static_cast<int>(t) - static_cast<int>(main_idx);
    w4[t] = tw.w4_at(off).values();
    w5[t] = tw.w5_at(off).values();
    w6[t] = tw.w6_at(off).values();
  }
  Tensor zt = tcm_forward(frames, main_idx, tw, EmbeddingStrategy::Positional);
  std::vector<double> ztr = ref::tcm(concat, T, C, HW, main_idx, w4, w5, w6);
  ok = zt.numel() == ztr.size();
  worst = 0.0;
  for (size_t i = 0; ok && i < ztr.size(); ++i)
    worst = std::max(worst, std::fabs(zt.values()[i] - ztr[i]));
  h.expect(ok && worst <= 1e-12, "tcm_forward vs reference (worst " + std::to_string(worst) + ")");

  // MainAndRefs changes gradient flow, not values.
  Tensor zm = tcm_forward(frames, main_idx, tw, EmbeddingStrategy::MainAndRefs);
  ok = true;
  for (size_t i = 0; i < zm.numel(); ++i)
    ok = ok && std::fabs(zm.values()[i] - zt.values()[i]) <= 1e-15;
  h.expect(ok, "embedding strategies agree in value");
  h.end();
}

// ---------------------------------------------------------------------------
// Suite 5: softmax and attention invariants plus frozen constants.
// ---------------------------------------------------------------------------

void suite_invariants(Harness& h, Rng& rng) {
  h.begin("softmax and attention invariants");
  Tape::Pause pause;

  Tensor lt = Tensor::from_data({2}, {0.0, std::log(2.0)});
  Tensor st = softmax(lt, 0);
  h.expect_near(st.values()[0], 1.0 / 3.0, 1e-15, "softmax([0,ln2])[0]");
  h.expect_near(st.values()[1], 2.0 / 3.0, 1e-15, "softmax([0,ln2])[1]");

  Tensor big = Tensor::from_data({4, 6}, random_vec(rng, 24, -30.0, 30.0));
  Tensor sb = softmax(big, 1);
  for (size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (size_t c = 0; c < 6; ++c) s += sb.values()[r * 6 + c];
    h.expect(std::fabs(s - 1.0) <= 1e-12, "softmax row sums to 1");
  }
  std::vector<double> shifted = big.values();
  for (double& v : shifted) v += 123.0;
  Tensor sb2 = softmax(Tensor::from_data({4, 6}, shifted), 1);
  bool shift_ok = true;
  for (size_t i = 0; i < 24; ++i)
    shift_ok = shift_ok && std::fabs(sb.values()[i] - sb2.values()[i]) <= 1e-12;
  h.expect(shift_ok, "softmax shift invariance");

  size_t T = 4, HW = 6;
  std::vector<double> same_row(HW);
  for (double& v : same_row) v = rng.uniform(-1.0, 1.0);
  std::vector<double> embed;
  for (size_t t = 0; t < T; ++t) embed.insert(embed.end(), same_row.begin(), same_row.end());
  Tensor ct = temporal_softmax(Tensor::from_data({T, 2, 3}, embed));
  bool uniform_ok = true;
  for (double v : ct.values()) uniform_ok = uniform_ok && std::fabs(v - 1.0 / T) <= 1e-12;
  h.expect(uniform_ok, "identical frames give uniform temporal softmax");

  Tensor xh = temporal_attention_map(ct);
  bool map_ok = true;
  for (double v : xh.values())
    map_ok = map_ok && std::fabs(v - 1.0 / (static_cast<double>(T) * T)) <= 1e-12;
  h.expect(map_ok, "uniform softmax gives x_hat = 1/T^2");

  Tensor e2 = Tensor::from_data({2, 1, 1}, {0.0, std::log(3.0)});
  Tensor c2 = temporal_softmax(e2);
  h.expect_near(c2.values()[0], 0.25, 1e-15, "temporal softmax [0,ln3] lower");
  h.expect_near(c2.values()[1], 0.75, 1e-15, "temporal softmax [0,ln3] upper");
  h.end();
}

// ---------------------------------------------------------------------------
// Suite 6: tape mechanics.
// ---------------------------------------------------------------------------

void suite_tape(Harness& h, Rng& rng) {
  h.begin("tape mechanics");
  Tensor x = Tensor::from_data({4}, random_vec(rng, 4));
  x.set_requires_grad(true);

  {
    x.zero_grad();
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = scale(mean_over(mul(x, x), {0}), 4.0);
    tape.backward(y);
    bool ok = true;
    for (size_t i = 0; i < 4; ++i)
      ok = ok && std::fabs(x.grad()[i] - 2.0 * x.values()[i]) <= 1e-12;
    h.expect(ok, "d(sum x^2)/dx = 2x");
  }
  {
    x.zero_grad();
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = scale(mean_over(mul(stop_gradient(x), x), {0}), 4.0);
    tape.backward(y);
    bool ok = true;
    for (size_t i = 0; i < 4; ++i) ok = ok && std::fabs(x.grad()[i] - x.values()[i]) <= 1e-12;
    h.expect(ok, "stop_gradient blocks one factor");
  }
  {
    x.zero_grad();
    Tape tape;
    {
      Tape::Scope scope(tape);
      Tape::Pause pause;
      Tensor y = mul(x, x);
      (void)y;
    }
    h.expect(tape.size() == 0, "Pause suppresses recording");
  }
  {
    SgdMomentum opt({Tensor::from_data({1}, {0.0})}, 0.9);
    Tensor p = opt.params()[0];
    p.set_requires_grad(true);
    p.grad_data()[0] = 1.0;
    opt.step(0.1);
    p.grad_data()[0] = 1.0;
    opt.step(0.1);
    h.expect_near(p.values()[0], -0.29, 1e-15, "sgd momentum two-step");
  }
  h.end();
}

// ---------------------------------------------------------------------------
// Suite 7: checkpoint roundtrip.
// ---------------------------------------------------------------------------

void suite_checkpoint(Harness& h, Rng& rng) {
  h.begin("checkpoint roundtrip");
  NamedTensors params;
  params.emplace_back("alpha.w", Tensor::from_data({2, 3}, random_vec(rng, 6)));
  params.emplace_back("beta.b", Tensor::from_data({5}, random_vec(rng, 5)));
  std::string path =
      (std::filesystem::temp_directory_path() / "blendnet_selftest_ckpt.bin").string();
  save_checkpoint(path, params);
  NamedTensors back = load_checkpoint(path);
  bool ok = back.size() == params.size();
  for (size_t i = 0; ok && i < back.size(); ++i) {
    ok = back[i].first == params[i].first && back[i].second.shape() == params[i].second.shape() &&
         bits_equal(back[i].second.values(), params[i].second.values());
  }
  h.expect(ok, "save/load preserves names, shapes and bits");
  std::filesystem::remove(path);
  h.end();
}

}  // namespace

size_t run_selftest(uint64_t seed) {
  Harness h;
  Rng rng(derive_seed(seed, "selftest"));
  suite_kernels(h, rng);
  suite_forward_oracles(h, rng);
  suite_gradients(h, rng);
  suite_blend_oracles(h, rng);
  suite_invariants(h, rng);
  suite_tape(h, rng);
  suite_checkpoint(h, rng);
  std::printf("selftest: %zu failure%s\n", h.failures, h.failures == 1 ? "" : "s");
  return h.failures;
}

}  // namespace blendnet
