#include "mmtf/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "mmtf/errors.hpp"

namespace mmtf {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_to_string(shape));
    }
  }
}

thread_local bool grad_disabled = false;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_disabled) { grad_disabled = true; }
NoGradGuard::~NoGradGuard() { grad_disabled = previous_; }
bool NoGradGuard::active() { return grad_disabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  auto t = zeros({n, n});
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " +
                        shape_to_string(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!impl_) throw ContractError("use of an undefined tensor");
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const {
  return impl_ && impl_->grad.size() == impl_->data.size();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) return {};
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.assign(impl_->data.size(), 0.0);
}

bool Tensor::is_leaf() const { return impl_ && !impl_->creator; }

Tensor Tensor::clone() const { return from(shape(), impl_->data, false); }

Tensor Tensor::detach() const { return clone(); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           const std::vector<Tensor>& inputs,
                           detail::BackwardFn backward) {
  auto result = from(std::move(shape), std::move(values), false);
  if (grad_disabled) return result;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return result;
  auto node = std::make_shared<detail::Node>();
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl_);
  node->backward = std::move(backward);
  result.impl_->creator = std::move(node);
  result.impl_->requires_grad = true;
  return result;
}

GradientTape::GradientTape(const Tensor& root) : root_(root.impl_ptr()) {
  if (!root_) throw ContractError("gradient tape over an undefined tensor");
  // Iterative post-order DFS: a node is emitted after all of its inputs.
  // Inputs are visited last-to-first, so the reverse replay handles the
  // first input's subgraph first. Gradients of a sum of losses then
  // accumulate in the same order as separate backward calls would.
  std::unordered_set<const detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root_.get(), 0);
  visited.insert(root_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto* creator = node->creator.get();
    if (creator && next < creator->inputs.size()) {
      detail::TensorImpl* child =
          creator->inputs[creator->inputs.size() - 1 - next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    nodes_.push_back(node);
    stack.pop_back();
  }
}

void GradientTape::backward() {
  for (auto* node : nodes_) {
    if (node->creator) node->grad.assign(node->data.size(), 0.0);
  }
  root_->ensure_grad();
  for (auto& g : root_->grad) g += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (!node->creator) continue;
    for (auto& in : node->creator->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    node->creator->backward(*node);
  }
  for (auto* node : nodes_) {
    if (node->creator) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError(
        "backward requires a scalar loss, got shape " +
        (loss.defined() ? shape_to_string(loss.shape()) : std::string("?")));
  }
  if (!loss.requires_grad()) return;
  GradientTape(loss).backward();
}

}  // namespace mmtf
