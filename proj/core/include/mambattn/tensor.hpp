// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mambattn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool is_leaf = true;
};

/// Dense row-major float64 array with an optional gradient slot.
///
/// A Tensor is a handle: copies alias the same storage, which is how a
/// parameter is shared between several call sites. Use clone() for a deep
/// copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return impl_->is_leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  /// Gradient buffer, zero-allocated on first use.
  std::span<double> mutable_grad();
  void zero_grad();

  /// Deep copy of the values; the result is a leaf without gradient.
  Tensor clone() const;

  const TensorImpl* id() const { return impl_.get(); }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
  friend struct TensorAccess;
};

namespace autograd {

struct Node {
  std::string_view op;
  std::vector<Tensor> inputs;
  Tensor output;
  std::function<void(Node&)> backward;
};

/// Ordered record of applied primitives; each node's inputs were produced
/// before it, so a reverse walk is a valid backward schedule.
class Tape {
 public:
  void push(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  std::vector<Node>& nodes() { return nodes_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

/// Activates a fresh tape for the current thread for its lifetime.
class GradScope {
 public:
  GradScope();
  ~GradScope();
  GradScope(const GradScope&) = delete;
  GradScope& operator=(const GradScope&) = delete;

  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* previous_;
};

/// Suspends recording for its lifetime.
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// True when a tape is active and at least one input requires a gradient.
bool should_record(std::span<const Tensor> inputs);
bool should_record(std::initializer_list<Tensor> inputs);

/// Marks `output` as a non-leaf and appends a node to the active tape.
void record(std::string_view op, std::vector<Tensor> inputs, Tensor& output,
            std::function<void(Node&)> backward);

/// Reverse pass from a scalar. Leaf gradients accumulate across calls;
/// intermediate gradients are reset at the start of each call.
void backward(const Tensor& output);

}  // namespace autograd
}  // namespace mambattn
