#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace tvnet {

enum class DType { f32, f64 };

// Process-wide default for newly created tensors. Tests and the gradient
// checker run in f64; f32 narrows every stored value to float precision.
DType default_dtype();
void set_default_dtype(DType d);

// Scoped override of the default dtype.
class DTypeGuard {
 public:
  explicit DTypeGuard(DType d) : previous_(default_dtype()) {
    set_default_dtype(d);
  }
  ~DTypeGuard() { set_default_dtype(previous_); }
  DTypeGuard(const DTypeGuard&) = delete;
  DTypeGuard& operator=(const DTypeGuard&) = delete;

 private:
  DType previous_;
};

// Disables graph recording inside its scope (inference, numeric probes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

size_t numel(const std::vector<size_t>& shape);

struct TensorImpl {
  std::vector<size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  DType dtype = DType::f64;

  // reverse-mode tape edge: reads this->grad, accumulates into parents
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  TensorImpl() = default;
  ~TensorImpl();

  void ensure_grad();
  void register_bytes(size_t n);

 private:
  size_t tracked_bytes_ = 0;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<size_t> shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor uniform(std::vector<size_t> shape, double lo, double hi,
                        std::mt19937_64& rng, bool requires_grad = false);
  static Tensor scalar(double v);

  // Builds an op output wired into the tape (no recording when grads are
  // globally disabled or no parent requires one).
  static Tensor make_node(std::vector<size_t> shape, DType dt,
                          std::vector<std::shared_ptr<TensorImpl>> parents,
                          std::function<void(TensorImpl&)> backward_fn);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<size_t>& shape() const { return impl_->shape; }
  size_t size() const { return impl_->data.size(); }
  size_t ndim() const { return impl_->shape.size(); }
  DType dtype() const { return impl_->dtype; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  double value() const;  // single-element tensors
  double at(std::initializer_list<size_t> idx) const;

  // Reverse-mode sweep from a scalar root. Visits each recorded op once in
  // reverse topological order, then releases the graph.
  void backward() const;

  Tensor detached_copy() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Narrows stored values to float precision for f32 tensors.
void quantize_to_dtype(TensorImpl& t);

bool all_finite(const std::vector<double>& v);

std::string shape_str(const std::vector<size_t>& shape);

}  // namespace tvnet
