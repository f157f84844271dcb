// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include "mambattn/layers.hpp"

namespace mambattn::optim {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
  bool operator==(const AdamWConfig&) const = default;
};

/// Decoupled weight decay Adam. Parameters without a gradient buffer are
/// skipped for that step.
class AdamW {
 public:
  AdamW(std::vector<nn::NamedTensor> params, AdamWConfig cfg);

  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<nn::NamedTensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamWConfig cfg_;
  double lr_;
  std::size_t t_ = 0;
};

/// lr0 * gamma^epoch.
double exponential_lr(double lr0, double gamma, std::size_t epoch);

}  // namespace mambattn::optim
