#include "tvnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "tvnet/counters.hpp"

namespace tvnet {

namespace {
DType g_default_dtype = DType::f64;
thread_local bool g_grad_enabled = true;
}  // namespace

DType default_dtype() { return g_default_dtype; }
void set_default_dtype(DType d) { g_default_dtype = d; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

OpCounter& op_counter() {
  thread_local OpCounter counter;
  return counter;
}

size_t numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void quantize_to_dtype(TensorImpl& t) {
  if (t.dtype != DType::f32) return;
  for (double& x : t.data) x = static_cast<double>(static_cast<float>(x));
}

TensorImpl::~TensorImpl() { op_counter().sub_alloc(tracked_bytes_); }

void TensorImpl::register_bytes(size_t n) {
  tracked_bytes_ += n;
  op_counter().add_alloc(n);
}

void TensorImpl::ensure_grad() {
  if (grad.empty() && !data.empty()) {
    grad.assign(data.size(), 0.0);
    register_bytes(grad.size() * sizeof(double));
  }
}

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<size_t> shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(numel(impl->shape), value);
  impl->dtype = g_default_dtype;
  impl->requires_grad = requires_grad;
  impl->register_bytes(impl->data.size() * sizeof(double));
  quantize_to_dtype(*impl);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> values,
                         bool requires_grad) {
  if (numel(shape) != values.size())
    throw std::invalid_argument("from_data: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->dtype = g_default_dtype;
  impl->requires_grad = requires_grad;
  impl->register_bytes(impl->data.size() * sizeof(double));
  quantize_to_dtype(*impl);
  return Tensor(std::move(impl));
}

Tensor Tensor::uniform(std::vector<size_t> shape, double lo, double hi,
                       std::mt19937_64& rng, bool requires_grad) {
  std::vector<double> v(numel(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& x : v) x = dist(rng);
  return from_data(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::make_node(std::vector<size_t> shape, DType dt,
                         std::vector<std::shared_ptr<TensorImpl>> parents,
                         std::function<void(TensorImpl&)> backward_fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(numel(impl->shape), 0.0);
  impl->dtype = dt;
  impl->register_bytes(impl->data.size() * sizeof(double));

  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p && p->requires_grad) needs_grad = true;
  }
  if (needs_grad) {
    impl->requires_grad = true;
    impl->parents = std::move(parents);
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(impl));
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad())
    throw std::runtime_error("tensor has no gradient; run backward() first");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::value() const {
  if (size() != 1)
    throw std::invalid_argument("value(): tensor has " +
                                std::to_string(size()) + " elements");
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<size_t> idx) const {
  if (idx.size() != impl_->shape.size())
    throw std::invalid_argument("at(): rank mismatch");
  size_t flat = 0;
  size_t axis = 0;
  for (size_t i : idx) {
    if (i >= impl_->shape[axis])
      throw std::out_of_range("at(): index out of range");
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

void Tensor::backward() const {
  if (!impl_) throw std::runtime_error("backward() on empty tensor");
  if (size() != 1)
    throw std::invalid_argument("backward() requires a scalar root");

  // iterative post-order DFS; nodes surface after all parents they feed from
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next].get();
      ++next;
      if (p && !visited.count(p) && p->requires_grad) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // release the graph so activations free promptly and a second sweep is inert
  for (TensorImpl* node : order) {
    node->backward_fn = nullptr;
    node->parents.clear();
  }
}

Tensor Tensor::detached_copy() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->dtype = impl_->dtype;
  impl->requires_grad = impl_->requires_grad;
  impl->register_bytes(impl->data.size() * sizeof(double));
  return Tensor(std::move(impl));
}

}  // namespace tvnet
