#include <cmath>
#include <cstring>
#include <vector>

#include <doctest.h>

#include "blendnet/common.hpp"
#include "blendnet/kernels.hpp"
#include "blendnet/ref_ops.hpp"
#include "blendnet/rng.hpp"

using namespace blendnet;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar table is always available and named") {
  const kern::KernelTable& t = kern::scalar_table();
  CHECK(std::string(t.name) == "scalar");
}

TEST_CASE("gemm_nn matches the naive reference") {
  Rng rng(21);
  for (auto [M, K, N] : {std::tuple<size_t, size_t, size_t>{1, 1, 1}, {3, 4, 5}, {7, 13, 2}}) {
    std::vector<double> a = random_vec(rng, M * K), b = random_vec(rng, K * N), c(M * N);
    kern::scalar_table().gemm_nn(M, K, N, a.data(), b.data(), c.data());
    std::vector<double> want = ref::matmul(a, M, K, b, N);
    for (size_t i = 0; i < c.size(); ++i) CHECK(std::fabs(c[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("gemm_tn and gemm_nt agree with explicit transposes") {
  Rng rng(22);
  const size_t M = 4, K = 6, N = 3;
  std::vector<double> a = random_vec(rng, M * K);   // [M,K]
  std::vector<double> b = random_vec(rng, K * N);   // [K,N]
  std::vector<double> at(K * M), bt(N * K);
  for (size_t m = 0; m < M; ++m)
    for (size_t k = 0; k < K; ++k) at[k * M + m] = a[m * K + k];
  for (size_t k = 0; k < K; ++k)
    for (size_t n = 0; n < N; ++n) bt[n * K + k] = b[k * N + n];

  std::vector<double> want = ref::matmul(a, M, K, b, N);
  std::vector<double> c1(M * N), c2(M * N);
  kern::scalar_table().gemm_tn(M, K, N, at.data(), b.data(), c1.data());
  kern::scalar_table().gemm_nt(M, K, N, a.data(), bt.data(), c2.data());
  for (size_t i = 0; i < want.size(); ++i) {
    CHECK(std::fabs(c1[i] - want[i]) < 1e-12);
    CHECK(std::fabs(c2[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("conv3x3 kernel matches the naive reference at every stride/pad") {
  Rng rng(23);
  for (size_t stride : {size_t{1}, size_t{2}})
    for (size_t pad : {size_t{0}, size_t{1}}) {
      const size_t Ci = 3, H = 7, W = 6, Co = 4;
      std::vector<double> x = random_vec(rng, Ci * H * W);
      std::vector<double> w = random_vec(rng, Co * Ci * 9);
      const size_t Ho = kern::conv_out_dim(H, pad, stride), Wo = kern::conv_out_dim(W, pad, stride);
      std::vector<double> y(Co * Ho * Wo);
      kern::scalar_table().conv3x3(x.data(), w.data(), y.data(), Ci, H, W, Co, stride, pad);
      std::vector<double> want = ref::conv3x3(x, Ci, H, W, w, Co, stride, pad);
      REQUIRE(y.size() == want.size());
      for (size_t i = 0; i < y.size(); ++i) CHECK(std::fabs(y[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("conv3x3 backward kernels match central differences") {
  Rng rng(24);
  const size_t Ci = 2, H = 5, W = 4, Co = 3;
  for (size_t stride : {size_t{1}, size_t{2}})
    for (size_t pad : {size_t{0}, size_t{1}}) {
      const size_t Ho = kern::conv_out_dim(H, pad, stride), Wo = kern::conv_out_dim(W, pad, stride);
      std::vector<double> x = random_vec(rng, Ci * H * W);
      std::vector<double> w = random_vec(rng, Co * Ci * 9);
      std::vector<double> gy = random_vec(rng, Co * Ho * Wo);

      auto loss = [&](const std::vector<double>& xv, const std::vector<double>& wv) {
        std::vector<double> y = ref::conv3x3(xv, Ci, H, W, wv, Co, stride, pad);
        double s = 0.0;
        for (size_t i = 0; i < y.size(); ++i) s += y[i] * gy[i];
        return s;
      };

      std::vector<double> gx(x.size()), gw(w.size());
      kern::scalar_table().conv3x3_bwd_input(w.data(), gy.data(), gx.data(), Ci, H, W, Co, stride,
                                             pad);
      kern::scalar_table().conv3x3_bwd_weight(x.data(), gy.data(), gw.data(), Ci, H, W, Co, stride,
                                              pad);
      const double eps = 1e-6;
      for (size_t i = 0; i < x.size(); i += 7) {
        std::vector<double> xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        double fd = (loss(xp, w) - loss(xm, w)) / (2 * eps);
        CHECK(std::fabs(fd - gx[i]) < 1e-7);
      }
      for (size_t i = 0; i < w.size(); i += 5) {
        std::vector<double> wp = w, wm = w;
        wp[i] += eps;
        wm[i] -= eps;
        double fd = (loss(x, wp) - loss(x, wm)) / (2 * eps);
        CHECK(std::fabs(fd - gw[i]) < 1e-7);
      }
    }
}

TEST_CASE("sgd_update frozen sequence") {
  const kern::KernelTable& t = kern::scalar_table();
  double p = 1.0, v = 0.0, g = 1.0;
  t.sgd_update(&p, &v, &g, 0.1, 0.9, 1);
  CHECK(p == doctest::Approx(0.9).epsilon(1e-15));  // first step moves by lr*g
  t.sgd_update(&p, &v, &g, 0.1, 0.9, 1);
  CHECK(p == doctest::Approx(0.71).epsilon(1e-15));  // momentum compounds: 0.9 - 0.19
  double p0 = p;
  t.sgd_update(&p, &v, &g, 0.0, 0.9, 1);
  CHECK(p == p0);  // lr 0 leaves parameters untouched
}

TEST_CASE("every backend produces bit-identical results") {
  const kern::KernelTable* avx2 = kern::avx2_table();
  if (!avx2) return;  // nothing to compare on this host
  const kern::KernelTable& sc = kern::scalar_table();
  Rng rng(25);

  SUBCASE("elementwise") {
    for (size_t n : {size_t{1}, size_t{7}, size_t{64}, size_t{1023}}) {
      std::vector<double> a = random_vec(rng, n), b = random_vec(rng, n);
      std::vector<double> y1(n), y2(n);
      sc.add(a.data(), b.data(), y1.data(), n);
      avx2->add(a.data(), b.data(), y2.data(), n);
      CHECK(bit_equal(y1, y2));
      sc.mul(a.data(), b.data(), y1.data(), n);
      avx2->mul(a.data(), b.data(), y2.data(), n);
      CHECK(bit_equal(y1, y2));
      sc.scale(1.7, a.data(), y1.data(), n);
      avx2->scale(1.7, a.data(), y2.data(), n);
      CHECK(bit_equal(y1, y2));
      sc.relu(a.data(), y1.data(), n);
      avx2->relu(a.data(), y2.data(), n);
      CHECK(bit_equal(y1, y2));
      std::vector<double> acc1 = b, acc2 = b;
      sc.axpy(-0.3, a.data(), acc1.data(), n);
      avx2->axpy(-0.3, a.data(), acc2.data(), n);
      CHECK(bit_equal(acc1, acc2));
    }
  }

  SUBCASE("gemm family") {
    const size_t M = 9, K = 17, N = 11;
    std::vector<double> a = random_vec(rng, M * K), b = random_vec(rng, K * N);
    std::vector<double> at(K * M), bt(N * K);
    for (size_t m = 0; m < M; ++m)
      for (size_t k = 0; k < K; ++k) at[k * M + m] = a[m * K + k];
    for (size_t k = 0; k < K; ++k)
      for (size_t n = 0; n < N; ++n) bt[n * K + k] = b[k * N + n];
    std::vector<double> c1(M * N), c2(M * N);
    sc.gemm_nn(M, K, N, a.data(), b.data(), c1.data());
    avx2->gemm_nn(M, K, N, a.data(), b.data(), c2.data());
    CHECK(bit_equal(c1, c2));
    sc.gemm_tn(M, K, N, at.data(), b.data(), c1.data());
    avx2->gemm_tn(M, K, N, at.data(), b.data(), c2.data());
    CHECK(bit_equal(c1, c2));
    sc.gemm_nt(M, K, N, a.data(), bt.data(), c1.data());
    avx2->gemm_nt(M, K, N, a.data(), bt.data(), c2.data());
    CHECK(bit_equal(c1, c2));
  }

  SUBCASE("conv3x3 forward and backward at every stride/pad") {
    for (size_t stride : {size_t{1}, size_t{2}})
      for (size_t pad : {size_t{0}, size_t{1}}) {
        const size_t Ci = 5, H = 11, W = 9, Co = 7;
        const size_t Ho = kern::conv_out_dim(H, pad, stride);
        const size_t Wo = kern::conv_out_dim(W, pad, stride);
        std::vector<double> x = random_vec(rng, Ci * H * W);
        std::vector<double> w = random_vec(rng, Co * Ci * 9);
        std::vector<double> gy = random_vec(rng, Co * Ho * Wo);

        std::vector<double> y1(Co * Ho * Wo), y2(Co * Ho * Wo);
        sc.conv3x3(x.data(), w.data(), y1.data(), Ci, H, W, Co, stride, pad);
        avx2->conv3x3(x.data(), w.data(), y2.data(), Ci, H, W, Co, stride, pad);
        CHECK(bit_equal(y1, y2));

        std::vector<double> gx1(x.size()), gx2(x.size());
        sc.conv3x3_bwd_input(w.data(), gy.data(), gx1.data(), Ci, H, W, Co, stride, pad);
        avx2->conv3x3_bwd_input(w.data(), gy.data(), gx2.data(), Ci, H, W, Co, stride, pad);
        CHECK(bit_equal(gx1, gx2));

        std::vector<double> gw1(w.size()), gw2(w.size());
        sc.conv3x3_bwd_weight(x.data(), gy.data(), gw1.data(), Ci, H, W, Co, stride, pad);
        avx2->conv3x3_bwd_weight(x.data(), gy.data(), gw2.data(), Ci, H, W, Co, stride, pad);
        CHECK(bit_equal(gw1, gw2));
      }
  }

  SUBCASE("sgd_update") {
    const size_t n = 37;
    std::vector<double> p = random_vec(rng, n), v = random_vec(rng, n), g = random_vec(rng, n);
    std::vector<double> p2 = p, v2 = v;
    sc.sgd_update(p.data(), v.data(), g.data(), 0.01, 0.9, n);
    avx2->sgd_update(p2.data(), v2.data(), g.data(), 0.01, 0.9, n);
    CHECK(bit_equal(p, p2));
    CHECK(bit_equal(v, v2));
  }
}

TEST_CASE("set_backend round trip") {
  kern::set_backend(kern::Backend::Scalar);
  CHECK(std::string(kern::active().name) == "scalar");
  if (kern::avx2_table()) {
    kern::set_backend(kern::Backend::Avx2);
    CHECK(std::string(kern::active().name) == "avx2");
  } else {
    CHECK_THROWS_AS(kern::set_backend(kern::Backend::Avx2), Error);
  }
  kern::set_backend(kern::Backend::Auto);
  const char* want = kern::avx2_table() ? "avx2" : "scalar";
  CHECK(std::string(kern::active().name) == want);
}
