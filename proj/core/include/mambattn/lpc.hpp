// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mambattn::lpc {

/// Biased autocorrelation r[0..max_lag].
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

struct Predictor {
  // A(z) = 1 + a[0] z^-1 + ... + a[p-1] z^-p
  std::vector<double> coefficients;
  std::vector<double> reflection;
  double error = 0.0;  // final prediction error power
};

/// Levinson-Durbin recursion. Throws NumericalError when a reflection
/// coefficient reaches |k| >= 1 or r[0] is not positive.
Predictor levinson_durbin(std::span<const double> r, std::size_t order);

/// Order-p predictor of a signal.
Predictor analyze(std::span<const double> x, std::size_t order);

/// All-pole synthesis y[n] = e[n] - sum_k a[k] y[n-1-k].
std::vector<double> synthesize(const Predictor& p, std::span<const double> excitation);

}  // namespace mambattn::lpc
