// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/ssm.hpp"

#include <cmath>
#include <string>

#include "mambattn/error.hpp"

namespace mambattn::ssm {

Discretized discretize_zoh(std::span<const double> a, std::span<const double> b,
                           std::span<const double> delta, std::size_t n,
                           std::size_t k) {
  if (a.size() != n * k || b.size() != n || delta.size() != k) {
    throw ShapeError("discretize_zoh: expected A " + std::to_string(n) + "x" +
                     std::to_string(k) + ", B of " + std::to_string(n) +
                     ", delta of " + std::to_string(k));
  }
  Discretized out;
  out.a_bar.resize(n * k);
  out.b_bar.resize(n * k);
  for (std::size_t j = 0; j < k; ++j) {
    if (!(delta[j] > 0.0)) {
      throw ShapeError("discretize_zoh: delta[" + std::to_string(j) + "] = " +
                       std::to_string(delta[j]) + " is not positive");
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t j = 0; j < k; ++j) {
      out.a_bar[p * k + j] = std::exp(delta[j] * a[p * k + j]);
      out.b_bar[p * k + j] = delta[j] * b[p];
    }
  return out;
}

MambaLayer::MambaLayer(const MambaConfig& cfg, nn::Rng& rng) : config(cfg) {
  const std::size_t d = cfg.d_model, inner = cfg.inner(), n = cfg.d_state,
                    r = cfg.rank();
  if (d == 0 || inner == 0 || n == 0 || cfg.conv_width == 0) {
    throw ShapeError("mamba: d_model, expand, d_state and conv_width must be positive");
  }
  in_proj = nn::uniform_parameter({d, 2 * inner}, d, rng);
  conv_weight = nn::uniform_parameter({inner, cfg.conv_width}, cfg.conv_width, rng);
  conv_bias = nn::constant_parameter({inner}, 0.0);
  w1 = nn::uniform_parameter({inner, r}, inner, rng);
  w2 = nn::uniform_parameter({r, inner}, r, rng);
  w_b = nn::uniform_parameter({inner, n}, inner, rng);
  w_c = nn::uniform_parameter({inner, n}, inner, rng);

  // Softplus(delta_bias) log-uniform in [dt_min, dt_max].
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> bias(inner);
  const double lo = std::log(cfg.dt_min), hi = std::log(cfg.dt_max);
  for (double& v : bias) {
    const double dt = std::exp(lo + unit(rng) * (hi - lo));
    v = dt + std::log(-std::expm1(-dt));
  }
  delta_bias = Tensor::parameter({inner}, std::move(bias));

  std::vector<double> alog(n * inner);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t j = 0; j < inner; ++j)
      alog[p * inner + j] = std::log(static_cast<double>(p + 1));
  a_log = Tensor::parameter({n, inner}, std::move(alog));

  if (cfg.zero_init_output) {
    out_proj = nn::constant_parameter({inner, d}, 0.0);
  } else {
    out_proj = nn::uniform_parameter({inner, d}, inner, rng);
  }
}

Tensor MambaLayer::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(2) != config.d_model) {
    throw ShapeError("mamba: input must be Bt x L x " +
                     std::to_string(config.d_model) + ", got " + to_string(x.shape()));
  }
  const std::size_t inner = config.inner();
  Tensor xz = ops::matmul(x, in_proj);
  Tensor u = ops::slice(xz, 2, 0, inner);
  Tensor z = ops::slice(xz, 2, inner, 2 * inner);
  u = ops::silu(ops::causal_depthwise_conv1d(u, conv_weight, conv_bias));
  Tensor delta =
      ops::softplus(ops::add(ops::matmul(ops::matmul(u, w1), w2), delta_bias));
  Tensor b = ops::matmul(u, w_b);
  Tensor c = ops::matmul(u, w_c);
  Tensor a = ops::neg(ops::exp(a_log));
  Tensor y = ops::selective_scan(u, delta, a, b, c);
  return ops::matmul(ops::mul(y, ops::silu(z)), out_proj);
}

void MambaLayer::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  fn(nn::join(prefix, "in_proj"), in_proj);
  fn(nn::join(prefix, "conv_weight"), conv_weight);
  fn(nn::join(prefix, "conv_bias"), conv_bias);
  fn(nn::join(prefix, "w1"), w1);
  fn(nn::join(prefix, "w2"), w2);
  fn(nn::join(prefix, "delta_bias"), delta_bias);
  fn(nn::join(prefix, "w_b"), w_b);
  fn(nn::join(prefix, "w_c"), w_c);
  fn(nn::join(prefix, "a_log"), a_log);
  fn(nn::join(prefix, "out_proj"), out_proj);
}

BiMamba::BiMamba(const MambaConfig& cfg, nn::Rng& rng)
    : forward_layer(std::make_shared<MambaLayer>(cfg, rng)),
      backward_layer(std::make_shared<MambaLayer>(cfg, rng)),
      merge(2 * cfg.d_model, cfg.d_model, true, rng) {}

BiMamba::BiMamba(std::shared_ptr<MambaLayer> fwd, std::shared_ptr<MambaLayer> bwd,
                 nn::Linear merge_layer)
    : forward_layer(std::move(fwd)),
      backward_layer(std::move(bwd)),
      merge(std::move(merge_layer)) {}

Tensor BiMamba::forward(const Tensor& x) const {
  Tensor f = forward_layer->forward(x);
  Tensor b = ops::flip(backward_layer->forward(ops::flip(x, 1)), 1);
  return merge.forward(ops::concat({f, b}, 2));
}

void BiMamba::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  forward_layer->visit(nn::join(prefix, "fwd"), fn);
  backward_layer->visit(nn::join(prefix, "bwd"), fn);
  merge.visit(nn::join(prefix, "merge"), fn);
}

}  // namespace mambattn::ssm
