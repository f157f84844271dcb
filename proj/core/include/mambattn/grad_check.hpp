// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mambattn/tensor.hpp"

namespace mambattn {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  // Coordinates whose gradient is tiny compared to the largest one are
  // judged against this fraction of the largest magnitude instead of their
  // own, so cancellation noise on near-zero entries does not dominate.
  double relative_floor = 1e-4;
  // 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  std::string failure;  // non-empty when a probe was non-finite
};

/// Compares backward() against central differences (f(x+h) - f(x-h)) / 2h
/// for a scalar function of one tensor.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, const GradCheckOptions& opts = {});

/// Same check over a set of tensors that `f` closes over (typically the
/// parameters of a layer). The tensors are perturbed in place and restored.
GradCheckReport grad_check_params(const std::function<Tensor()>& f,
                                  std::vector<Tensor> params,
                                  const GradCheckOptions& opts = {});

}  // namespace mambattn
