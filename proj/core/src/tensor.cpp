// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "mambattn/error.hpp"

namespace mambattn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

struct TensorAccess {
  static TensorImpl& impl(Tensor& t) { return *t.impl_; }
};

Tensor::Tensor(Shape shape, double fill)
    : impl_(std::make_shared<TensorImpl>()) {
  const std::size_t n = mambattn::numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(n, fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : impl_(std::make_shared<TensorImpl>()) {
  if (mambattn::numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + to_string(shape) + " holds " +
                     std::to_string(mambattn::numel(shape)) + " elements, got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item: tensor of shape " + to_string(shape()) +
                     " is not a scalar");
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data); }

namespace autograd {
namespace {
thread_local Tape* g_active = nullptr;
}  // namespace

GradScope::GradScope() : previous_(g_active) { g_active = &tape_; }
GradScope::~GradScope() { g_active = previous_; }

NoGrad::NoGrad() : previous_(g_active) { g_active = nullptr; }
NoGrad::~NoGrad() { g_active = previous_; }

Tape* active_tape() { return g_active; }

bool should_record(std::span<const Tensor> inputs) {
  if (g_active == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
    return t.defined() && t.requires_grad();
  });
}

bool should_record(std::initializer_list<Tensor> inputs) {
  return should_record(std::span<const Tensor>(inputs.begin(), inputs.size()));
}

void record(std::string_view op, std::vector<Tensor> inputs, Tensor& output,
            std::function<void(Node&)> backward) {
  TensorImpl& impl = TensorAccess::impl(output);
  impl.requires_grad = true;
  impl.is_leaf = false;
  g_active->push(Node{op, std::move(inputs), output, std::move(backward)});
}

void backward(const Tensor& output) {
  if (output.numel() != 1) {
    throw ShapeError("backward: output of shape " + to_string(output.shape()) +
                     " is not a scalar");
  }
  if (!output.requires_grad()) return;
  Tensor root = output;
  if (root.is_leaf()) {
    root.mutable_grad()[0] += 1.0;
    return;
  }
  Tape* tape = g_active;
  if (tape == nullptr) {
    throw ShapeError("backward: no active gradient tape");
  }
  auto& nodes = tape->nodes();
  for (auto& node : nodes) node.output.zero_grad();
  root.mutable_grad()[0] = 1.0;
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward(*it);
  }
}

}  // namespace autograd
}  // namespace mambattn
