#pragma once

#include <cstdint>
#include <vector>

#include "blendnet/tensor.hpp"

namespace blendnet {

// Differentiable ops. Each op validates shapes (errors name the offending
// shapes), computes the forward value through the active kernel table, and,
// when a Tape is current and some input requires grad, records one backward
// node. Without a current tape they are plain functions on values.

// x [C, ...], w [Co, C]  ->  [Co, ...]
Tensor conv1x1(const Tensor& x, const Tensor& w);
// x [Ci,H,W], w [Co,Ci,3,3], stride 1 or 2, pad 0 or 1  ->  [Co,Ho,Wo]
Tensor conv3x3(const Tensor& x, const Tensor& w, size_t stride, size_t pad);
// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Numerically stable (max-subtracted) softmax along `axis`.
Tensor softmax(const Tensor& x, size_t axis);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_n(const std::vector<Tensor>& xs);

// v [C] broadcast over the trailing axes of x [C, ...].
Tensor broadcast_add(const Tensor& x, const Tensor& v);
Tensor broadcast_mul(const Tensor& x, const Tensor& v);

// Mean over the given axes; reduced axes are dropped from the shape.
// Reducing every axis yields a rank-0 scalar.
Tensor mean_over(const Tensor& x, std::vector<size_t> axes);

Tensor reshape(const Tensor& x, std::vector<size_t> new_shape);
// k tensors of identical shape [d...] -> [k, d...]
Tensor stack0(const std::vector<Tensor>& xs);
// [k, d...] -> [d...], row i
Tensor take0(const Tensor& x, size_t i);

// Nearest-neighbour resize of [C,H,W] to [C,Ht,Wt]; source index floor-mapped.
Tensor upsample_nearest(const Tensor& x, size_t Ht, size_t Wt);

// Value copy that detaches from the graph (requires_grad = false, no record).
Tensor stop_gradient(const Tensor& x);

// Focal loss over sigmoid logits. target: +1 positive, 0 negative, -1 ignore,
// aligned elementwise with `logits`. p_t is clamped to [1e-12, 1-1e-12]
// before the log. Result: sum over non-ignored elements / normalizer.
Tensor focal_loss(const Tensor& logits, const std::vector<int8_t>& target,
                  double alpha, double gamma, double normalizer);

// Smooth-L1 (Huber) over masked elements / normalizer.
Tensor smooth_l1_loss(const Tensor& pred, const std::vector<double>& target,
                      const std::vector<uint8_t>& mask, double beta, double normalizer);

}  // namespace blendnet
