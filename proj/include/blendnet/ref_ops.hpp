#pragma once

#include <cstddef>
#include <vector>

namespace blendnet::ref {

// Naive loop references, written straight from the defining equations and
// independent of the kernel/op implementations. They exist purely as oracles
// for tests and the selftest command; nothing on a hot path calls them.

std::vector<double> conv1x1(const std::vector<double>& x, size_t C, size_t N,
                            const std::vector<double>& w, size_t Co);

std::vector<double> conv3x3(const std::vector<double>& x, size_t Ci, size_t H, size_t W,
                            const std::vector<double>& w, size_t Co, size_t stride, size_t pad);

std::vector<double> matmul(const std::vector<double>& a, size_t M, size_t K,
                           const std::vector<double>& b, size_t N);

std::vector<double> softmax(const std::vector<double>& x);

// Eq-by-eq blend references. Layouts: x is [C,H,W] row-major, embeddings and
// attention maps are [T,H,W].
std::vector<double> scm(const std::vector<double>& x, size_t C, size_t H, size_t W,
                        const std::vector<double>& w1, const std::vector<double>& w2, size_t Ce,
                        const std::vector<double>& w3);

std::vector<double> temporal_softmax(const std::vector<double>& e, size_t T, size_t HW);

std::vector<double> attention_map(const std::vector<double>& c, size_t T, size_t HW);

// frames: T tensors of [C,H,W] concatenated; weights per frame index
// (already offset-resolved by the caller): w4 [T][C], w5/w6 [T][C*C].
std::vector<double> tcm(const std::vector<double>& frames, size_t T, size_t C, size_t HW,
                        size_t main_idx, const std::vector<std::vector<double>>& w4,
                        const std::vector<std::vector<double>>& w5,
                        const std::vector<std::vector<double>>& w6);

}  // namespace blendnet::ref
