#include "blendnet/tensor.hpp"

#include <numeric>

#include "blendnet/kernels.hpp"

namespace blendnet {

namespace {

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

thread_local Tape* g_current_tape = nullptr;

}  // namespace

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  Tensor t;
  t.impl = std::make_shared<TensorImpl>();
  t.impl->shape = std::move(shape);
  t.impl->val.assign(shape_numel(t.impl->shape), 0.0);
  t.impl->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(std::vector<size_t> shape, double v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& x : t.impl->val) x = v;
  return t;
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data, bool requires_grad) {
  const size_t n = shape_numel(shape);
  check(data.size() == n, "from_data: ", data.size(), " values for shape ", shape_str(shape));
  Tensor t;
  t.impl = std::make_shared<TensorImpl>();
  t.impl->shape = std::move(shape);
  t.impl->val = std::move(data);
  t.impl->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar_value(double v) { return from_data({}, {v}); }

double* Tensor::grad_data() {
  if (impl->grad.empty()) impl->grad.assign(impl->val.size(), 0.0);
  return impl->grad.data();
}

const std::vector<double>& Tensor::grad() const {
  if (impl->grad.empty()) impl->grad.assign(impl->val.size(), 0.0);
  return impl->grad;
}

void Tensor::zero_grad() {
  if (!impl->grad.empty()) impl->grad.assign(impl->val.size(), 0.0);
}

double Tensor::item() const {
  check(numel() == 1, "item(): tensor has ", numel(), " elements, shape ", shape_str(shape()));
  return impl->val[0];
}

double Tensor::at(std::initializer_list<size_t> idx) const {
  check(idx.size() == ndim(), "at(): ", idx.size(), " indices for shape ", shape_str(shape()));
  size_t flat = 0, i = 0;
  for (size_t v : idx) {
    check(v < impl->shape[i], "at(): index ", v, " out of range for dim ", i, " of ",
          shape_str(shape()));
    flat = flat * impl->shape[i] + v;
    ++i;
  }
  return impl->val[flat];
}

void Tape::backward(const Tensor& loss) {
  check(loss.defined(), "backward: undefined loss tensor");
  check(loss.numel() == 1, "backward: loss must be scalar, got shape ", shape_str(loss.shape()));
  check(loss.requires_grad(), "backward: loss is not attached to this graph (requires_grad false)");
  check(!consumed_, "backward: tape already consumed; build a fresh tape per step");
  consumed_ = true;
  loss.impl->grad.assign(1, 1.0);
  for (size_t i = records_.size(); i-- > 0;) records_[i]();
}

Tape* Tape::current() { return g_current_tape; }

Tape::Scope::Scope(Tape& t) : prev_(g_current_tape) { g_current_tape = &t; }
Tape::Scope::~Scope() { g_current_tape = prev_; }

Tape::Pause::Pause() : prev_(g_current_tape) { g_current_tape = nullptr; }
Tape::Pause::~Pause() { g_current_tape = prev_; }

namespace detail {

void accumulate_grad(TensorImpl& t, const double* g, size_t n) {
  if (t.grad.empty()) t.grad.assign(t.val.size(), 0.0);
  kern::active().axpy(1.0, g, t.grad.data(), n);
}

}  // namespace detail

}  // namespace blendnet
