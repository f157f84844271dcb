// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/optim.hpp"

#include <cmath>

#include "mambattn/error.hpp"

namespace mambattn::optim {

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw DataError("adamw: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DataError("adamw: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw DataError("adamw: eps must be positive");
  if (!(weight_decay >= 0.0)) throw DataError("adamw: weight_decay must be >= 0");
}

AdamW::AdamW(std::vector<nn::NamedTensor> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg), lr_(cfg.lr) {
  cfg_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    if (!p.has_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr_ * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[j]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double exponential_lr(double lr0, double gamma, std::size_t epoch) {
  return lr0 * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace mambattn::optim
