#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "blendnet/common.hpp"

namespace blendnet {

// Dense row-major fp64 tensor. Values and (lazily allocated) gradients share
// the impl, so copies of a Tensor are views of the same storage.
struct TensorImpl {
  std::vector<size_t> shape;
  std::vector<double> val;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double v, bool requires_grad = false);
  static Tensor from_data(std::vector<size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar_value(double v);

  bool defined() const { return impl != nullptr; }
  const std::vector<size_t>& shape() const { return impl->shape; }
  size_t ndim() const { return impl->shape.size(); }
  size_t dim(size_t i) const { return impl->shape[i]; }
  size_t numel() const { return impl->val.size(); }

  double* data() { return impl->val.data(); }
  const double* data() const { return impl->val.data(); }
  std::vector<double>& values() { return impl->val; }
  const std::vector<double>& values() const { return impl->val; }

  bool requires_grad() const { return impl->requires_grad; }
  void set_requires_grad(bool rg) { impl->requires_grad = rg; }

  // Gradient access; allocates a zeroed buffer on first use.
  double* grad_data();
  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;
  double at(std::initializer_list<size_t> idx) const;

  std::shared_ptr<TensorImpl> impl;
};

// Reverse-mode tape. Ops run while a Tape is current append one backward
// record each; records execute in reverse order, which visits every node
// exactly once because append order is a topological order of the forward
// graph. Construction and backward are single-threaded by contract.
class Tape {
 public:
  using Record = std::function<void()>;

  void record(Record r) { records_.push_back(std::move(r)); }
  size_t size() const { return records_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs all records in reverse. The tape is
  // consumed: calling backward a second time throws.
  void backward(const Tensor& loss);

  static Tape* current();

  // Installs a tape as current for the enclosing scope.
  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();

   private:
    Tape* prev_;
  };

  // Temporarily disables recording (inference paths, stop-gradient subtrees).
  class Pause {
   public:
    Pause();
    ~Pause();

   private:
    Tape* prev_;
  };

 private:
  std::vector<Record> records_;
  bool consumed_ = false;
};

namespace detail {
// grad += g, allocating on demand. The workhorse of every backward record.
void accumulate_grad(TensorImpl& t, const double* g, size_t n);
}  // namespace detail

}  // namespace blendnet
