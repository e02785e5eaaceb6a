#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mmtf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorImpl;

// Backward rule of one recorded operation. Receives the output node (whose
// grad is populated) and accumulates into the grads of its inputs.
using BackwardFn = std::function<void(TensorImpl& out)>;

struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty == absent
  bool requires_grad = false;
  std::shared_ptr<Node> creator;  // null for leaves

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major tensor of doubles. Copies are shallow handles onto the same
// storage; use clone() for a deep copy. Shape never changes after creation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view for optimizers, initializers and finite differences.
  // Mutating a tensor that already feeds a recorded graph is undefined.
  std::span<double> mutable_data();
  double at(std::size_t flat_index) const { return data()[flat_index]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  // Zero-length span when absent.
  std::span<const double> grad() const;
  void zero_grad();
  bool is_leaf() const;

  Tensor clone() const;  // detached deep copy
  Tensor detach() const;  // shares nothing, drops grad tracking
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

  // Records a new node. `inputs` that do not require grad are kept only for
  // bookkeeping; the node is dropped entirely when none require grad.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            const std::vector<Tensor>& inputs,
                            detail::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Ordered record of every operation reachable from a root, inputs first.
class GradientTape {
 public:
  explicit GradientTape(const Tensor& root);

  const std::vector<detail::TensorImpl*>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  // Seeds d(root)/d(root) = 1 and replays every backward rule once, in
  // reverse order. Leaf grads accumulate; intermediate grads are released.
  void backward();

 private:
  std::shared_ptr<detail::TensorImpl> root_;
  std::vector<detail::TensorImpl*> nodes_;
};

// While alive, operations on this thread record no graph (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

// Populates dLoss/dParam on every reachable requires_grad leaf.
// Throws ContractError when `loss` is not a single-element tensor.
void backward(const Tensor& loss);

}  // namespace mmtf
