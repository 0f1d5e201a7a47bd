#pragma once

// Dense double-precision tensors with tape-free reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node. Operations that consume a
// tensor requiring gradients produce a node that remembers its parents and a
// backward closure; Tensor::backward() walks the graph in reverse
// topological order. Leaf gradients accumulate across backward passes until
// zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace csifb::tk {

using Shape = std::vector<std::size_t>;

// Storage is over-aligned so Eigen's vectorized kernels see the same
// alignment on every run; with AVX and plain malloc alignment their
// unaligned prologues, and so the summation order, vary between runs.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  Buffer data;
  Buffer grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Buffer& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, Buffer values, bool requires_grad = false);
  Tensor(Shape shape, const std::vector<double>& values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> data() { return node_->data; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> grad_mut() { return node_->grad_buffer(); }
  void zero_grad();

  // Scalar outputs: seed 1.
  void backward();
  void backward(std::span<const double> seed);

  // Copy of the data without graph history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, Buffer, const std::vector<Tensor>&,
                            std::function<void(detail::Node&)>);
};

// Graph recording is disabled while a guard is alive on this thread.
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

// Builds an operation result. The backward closure receives the result node;
// it reads node.grad and accumulates into node.parents[i] (same order as
// `parents`) for every parent that requires grad.
Tensor make_result(Shape shape, Buffer data, const std::vector<Tensor>& parents,
                   std::function<void(detail::Node&)> backward);

}  // namespace csifb::tk
