// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mambattn/tensor.hpp"

namespace mambattn::testing {

inline std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), uniform(n, seed, lo, hi));
}

inline Tensor random_param(Shape shape, std::uint64_t seed, double lo = -1.0,
                           double hi = 1.0) {
  Tensor t = random_tensor(std::move(shape), seed, lo, hi);
  t.set_requires_grad(true);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_identical(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace mambattn::testing
