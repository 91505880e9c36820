#pragma once

#include <cstddef>
#include <vector>

#include "blendnet/tensor.hpp"

namespace blendnet {

// Plain SGD with momentum over a fixed parameter list:
//   v <- momentum * v + grad
//   p <- p - lr * v
// Velocity buffers start at zero and live as long as the optimizer.
class SgdMomentum {
 public:
  explicit SgdMomentum(std::vector<Tensor> params, double momentum = 0.9);

  void step(double lr);
  void zero_grad();

  const std::vector<Tensor>& params() const { return params_; }
  double momentum() const { return momentum_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
};

// Closed-form learning-rate schedule: linear warmup from lr_start to lr_peak
// across the first warmup_iters iterations (by global iteration index), then
// a multiplicative decay at the start of each epoch in decay_epochs. Epochs
// are 1-indexed, so epoch 6 is the sixth epoch of training.
struct LrSchedule {
  double lr_start = 0.002;
  double lr_peak = 0.01;
  size_t warmup_iters = 500;
  std::vector<size_t> decay_epochs{6, 11};
  double decay_factor = 0.1;

  double at(size_t iter, size_t epoch) const;
};

}  // namespace blendnet
