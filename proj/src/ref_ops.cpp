#include "blendnet/ref_ops.hpp"

#include <cmath>

namespace blendnet::ref {

std::vector<double> conv1x1(const std::vector<double>& x, size_t C, size_t N,
                            const std::vector<double>& w, size_t Co) {
  std::vector<double> y(Co * N, 0.0);
  for (size_t o = 0; o < Co; ++o)
    for (size_t n = 0; n < N; ++n)
      for (size_t c = 0; c < C; ++c) y[o * N + n] += w[o * C + c] * x[c * N + n];
  return y;
}

std::vector<double> conv3x3(const std::vector<double>& x, size_t Ci, size_t H, size_t W,
                            const std::vector<double>& w, size_t Co, size_t stride, size_t pad) {
  const size_t Ho = (H + 2 * pad - 3) / stride + 1;
  const size_t Wo = (W + 2 * pad - 3) / stride + 1;
  std::vector<double> y(Co * Ho * Wo, 0.0);
  for (size_t co = 0; co < Co; ++co)
    for (size_t oy = 0; oy < Ho; ++oy)
      for (size_t ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (size_t ci = 0; ci < Ci; ++ci)
          for (size_t ky = 0; ky < 3; ++ky)
            for (size_t kx = 0; kx < 3; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                continue;
              acc += w[((co * Ci + ci) * 3 + ky) * 3 + kx] * x[(ci * H + iy) * W + ix];
            }
        y[(co * Ho + oy) * Wo + ox] = acc;
      }
  return y;
}

std::vector<double> matmul(const std::vector<double>& a, size_t M, size_t K,
                           const std::vector<double>& b, size_t N) {
  std::vector<double> c(M * N, 0.0);
  for (size_t m = 0; m < M; ++m)
    for (size_t n = 0; n < N; ++n)
      for (size_t k = 0; k < K; ++k) c[m * N + n] += a[m * K + k] * b[k * N + n];
  return c;
}

std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i]);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

std::vector<double> scm(const std::vector<double>& x, size_t C, size_t H, size_t W,
                        const std::vector<double>& w1, const std::vector<double>& w2, size_t Ce,
                        const std::vector<double>& w3) {
  const size_t M = H * W;
  // attention logits and weights over positions
  std::vector<double> logits(M, 0.0);
  for (size_t j = 0; j < M; ++j)
    for (size_t c = 0; c < C; ++c) logits[j] += w1[c] * x[c * M + j];
  std::vector<double> alpha = softmax(logits);
  // embedded positions and weighted context
  std::vector<double> ctx(Ce, 0.0);
  for (size_t e = 0; e < Ce; ++e)
    for (size_t j = 0; j < M; ++j) {
      double emb = 0.0;
      for (size_t c = 0; c < C; ++c) emb += w2[e * C + c] * x[c * M + j];
      ctx[e] += alpha[j] * emb;
    }
  // lift back to C channels and add to every position
  std::vector<double> z(x);
  for (size_t c = 0; c < C; ++c) {
    double lift = 0.0;
    for (size_t e = 0; e < Ce; ++e) lift += w3[c * Ce + e] * ctx[e];
    for (size_t j = 0; j < M; ++j) z[c * M + j] += lift;
  }
  return z;
}

std::vector<double> temporal_softmax(const std::vector<double>& e, size_t T, size_t HW) {
  std::vector<double> c(T * HW);
  for (size_t j = 0; j < HW; ++j) {
    double sum = 0.0;
    for (size_t t = 0; t < T; ++t) sum += std::exp(e[t * HW + j]);
    for (size_t t = 0; t < T; ++t) c[t * HW + j] = std::exp(e[t * HW + j]) / sum;
  }
  return c;
}

std::vector<double> attention_map(const std::vector<double>& c, size_t T, size_t HW) {
  std::vector<double> xhat(T * HW);
  for (size_t t = 0; t < T; ++t) {
    double mass = 0.0;
    for (size_t j = 0; j < HW; ++j) mass += c[t * HW + j];
    for (size_t j = 0; j < HW; ++j) xhat[t * HW + j] = c[t * HW + j] * mass / static_cast<double>(HW);
  }
  return xhat;
}

std::vector<double> tcm(const std::vector<double>& frames, size_t T, size_t C, size_t HW,
                        size_t main_idx, const std::vector<std::vector<double>>& w4,
                        const std::vector<std::vector<double>>& w5,
                        const std::vector<std::vector<double>>& w6) {
  // Eq. 3 embeddings and the cross-frame softmax.
  std::vector<double> e(T * HW, 0.0);
  for (size_t t = 0; t < T; ++t)
    for (size_t j = 0; j < HW; ++j)
      for (size_t c = 0; c < C; ++c) e[t * HW + j] += w4[t][c] * frames[(t * C + c) * HW + j];
  std::vector<double> csoft = temporal_softmax(e, T, HW);
  std::vector<double> xhat = attention_map(csoft, T, HW);

  // Eq. 5 aggregation.
  std::vector<double> z(frames.begin() + main_idx * C * HW,
                        frames.begin() + (main_idx + 1) * C * HW);
  for (size_t m = 0; m < T; ++m) {
    // attended context of frame m
    std::vector<double> att(C, 0.0);
    for (size_t c = 0; c < C; ++c)
      for (size_t j = 0; j < HW; ++j) att[c] += xhat[m * HW + j] * frames[(m * C + c) * HW + j];
    std::vector<double> lift(C, 0.0);
    for (size_t c = 0; c < C; ++c)
      for (size_t k = 0; k < C; ++k) lift[c] += w5[m][c * C + k] * att[k];
    // w6_m (x_m (+) lift), accumulated into z
    for (size_t c = 0; c < C; ++c)
      for (size_t j = 0; j < HW; ++j) {
        double inner = 0.0;
        for (size_t k = 0; k < C; ++k)
          inner += w6[m][c * C + k] * (frames[(m * C + k) * HW + j] + lift[k]);
        z[c * HW + j] += inner;
      }
  }
  return z;
}

}  // namespace blendnet::ref
