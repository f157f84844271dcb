// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/layers.hpp"

#include <cmath>
#include <unordered_set>

#include "mambattn/error.hpp"

namespace mambattn::nn {

std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

std::vector<NamedTensor> Module::parameters() {
  std::vector<NamedTensor> out;
  std::unordered_set<const TensorImpl*> seen;
  visit("", [&](const std::string& name, Tensor& t) {
    if (seen.insert(t.id()).second) out.push_back({name, t});
  });
  return out;
}

std::size_t Module::parameter_count() {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

void Module::zero_grad() {
  visit("", [](const std::string&, Tensor& t) { t.zero_grad(); });
}

Tensor uniform_parameter(Shape shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw ShapeError("uniform_parameter: fan_in is zero");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(data));
}

Tensor constant_parameter(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, value));
}

Linear::Linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng)
    : weight(uniform_parameter({in, out}, in, rng)) {
  if (with_bias) bias = constant_parameter({out}, 0.0);
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = ops::matmul(x, weight);
  return bias.defined() ? ops::add(y, bias) : y;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "weight"), weight);
  if (bias.defined()) fn(join(prefix, "bias"), bias);
}

LayerNorm::LayerNorm(std::size_t dim)
    : gamma(constant_parameter({dim}, 1.0)), beta(constant_parameter({dim}, 0.0)) {}

Tensor LayerNorm::forward(const Tensor& x) const {
  return ops::layer_norm(x, gamma, beta);
}

void LayerNorm::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "gamma"), gamma);
  fn(join(prefix, "beta"), beta);
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
               ops::Conv2dOptions opts, Rng& rng)
    : weight(uniform_parameter({out, in, kh, kw}, in * kh * kw, rng)),
      bias(constant_parameter({out}, 0.0)),
      options(opts) {}

Tensor Conv2d::forward(const Tensor& x) const {
  return ops::conv2d(x, weight, bias, options);
}

void Conv2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "weight"), weight);
  fn(join(prefix, "bias"), bias);
}

ConvTranspose2d::ConvTranspose2d(std::size_t in, std::size_t out, std::size_t kh,
                                 std::size_t kw, ops::Conv2dOptions opts, Rng& rng)
    : weight(uniform_parameter({in, out, kh, kw}, out * kh * kw, rng)),
      bias(constant_parameter({out}, 0.0)),
      options(opts) {}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
  return ops::conv_transpose2d(x, weight, bias, options);
}

void ConvTranspose2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "weight"), weight);
  fn(join(prefix, "bias"), bias);
}

InstanceNorm2d::InstanceNorm2d(std::size_t channels)
    : gamma(constant_parameter({channels}, 1.0)),
      beta(constant_parameter({channels}, 0.0)) {}

Tensor InstanceNorm2d::forward(const Tensor& x) const {
  return ops::instance_norm(x, gamma, beta);
}

void InstanceNorm2d::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "gamma"), gamma);
  fn(join(prefix, "beta"), beta);
}

PReLU::PReLU(std::size_t channels) : slope(constant_parameter({channels}, 0.25)) {}

Tensor PReLU::forward(const Tensor& x) const { return ops::prelu(x, slope, 1); }

void PReLU::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(join(prefix, "slope"), slope);
}

ConvBlock::ConvBlock(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                     ops::Conv2dOptions opts, bool is_transposed, Rng& rng)
    : transposed(is_transposed), norm(out), act(out) {
  if (transposed) {
    deconv = ConvTranspose2d(in, out, kh, kw, opts, rng);
  } else {
    conv = Conv2d(in, out, kh, kw, opts, rng);
  }
}

Tensor ConvBlock::forward(const Tensor& x) const {
  Tensor y = transposed ? deconv.forward(x) : conv.forward(x);
  return act.forward(norm.forward(y));
}

void ConvBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
  if (transposed) {
    deconv.visit(join(prefix, "deconv"), fn);
  } else {
    conv.visit(join(prefix, "conv"), fn);
  }
  norm.visit(join(prefix, "norm"), fn);
  act.visit(join(prefix, "act"), fn);
}

DilatedDenseNet::DilatedDenseNet(std::size_t channels, std::size_t depth, Rng& rng) {
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t dilation = std::size_t{1} << i;
    ops::Conv2dOptions o;
    o.dilation = {dilation, 1};
    o.padding = {dilation, dilation, 1, 1};
    layers.emplace_back(channels * (i + 1), channels, 3, 3, o, false, rng);
  }
}

Tensor DilatedDenseNet::forward(const Tensor& x) const {
  Tensor skip = x;
  Tensor out = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out = layers[i].forward(skip);
    if (i + 1 < layers.size()) skip = ops::concat({out, skip}, 1);
  }
  return out;
}

void DilatedDenseNet::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].visit(join(prefix, "layers." + std::to_string(i)), fn);
  }
}

}  // namespace mambattn::nn
