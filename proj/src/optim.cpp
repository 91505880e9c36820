#include "blendnet/optim.hpp"

#include "blendnet/common.hpp"
#include "blendnet/kernels.hpp"

namespace blendnet {

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double momentum)
    : params_(std::move(params)), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (const Tensor& p : params_) {
    check(p.defined(), "SgdMomentum: undefined parameter tensor");
    velocity_.emplace_back(p.numel(), 0.0);
  }
}

void SgdMomentum::step(double lr) {
  const kern::KernelTable& k = kern::active();
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    k.sgd_update(p.data(), velocity_[i].data(), p.grad_data(), lr, momentum_, p.numel());
  }
}

void SgdMomentum::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double LrSchedule::at(size_t iter, size_t epoch) const {
  double lr = lr_peak;
  if (warmup_iters > 0 && iter < warmup_iters) {
    const double frac = static_cast<double>(iter) / static_cast<double>(warmup_iters);
    lr = lr_start + (lr_peak - lr_start) * frac;
  }
  for (size_t d : decay_epochs)
    if (epoch >= d) lr *= decay_factor;
  return lr;
}

}  // namespace blendnet
