// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/lpc.hpp"

#include <cmath>
#include <string>

#include "mambattn/error.hpp"

namespace mambattn::lpc {

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  std::vector<double> r(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag && k < x.size(); ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n + k < x.size(); ++n) s += x[n] * x[n + k];
    r[k] = s;
  }
  return r;
}

Predictor levinson_durbin(std::span<const double> r, std::size_t order) {
  if (order == 0) throw DataError("lpc: order must be >= 1");
  if (r.size() < order + 1) {
    throw DataError("lpc: need " + std::to_string(order + 1) + " autocorrelation lags, got " +
                    std::to_string(r.size()));
  }
  if (!(r[0] > 0.0)) throw NumericalError("lpc: zero-energy source (r[0] = 0)");
  Predictor p;
  std::vector<double> a(order + 1, 0.0), prev(order + 1, 0.0);
  a[0] = 1.0;
  double err = r[0];
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
    const double k = -acc / err;
    if (!(std::abs(k) < 1.0)) {
      throw NumericalError("lpc: unstable filter, reflection coefficient k" +
                           std::to_string(i) + " = " + std::to_string(k));
    }
    prev = a;
    for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= 1.0 - k * k;
    p.reflection.push_back(k);
  }
  p.coefficients.assign(a.begin() + 1, a.end());
  p.error = err;
  return p;
}

Predictor analyze(std::span<const double> x, std::size_t order) {
  if (x.size() <= order) {
    throw DataError("lpc: source of " + std::to_string(x.size()) +
                    " samples is too short for order " + std::to_string(order));
  }
  const auto r = autocorrelation(x, order);
  return levinson_durbin(r, order);
}

std::vector<double> synthesize(const Predictor& p, std::span<const double> excitation) {
  const std::size_t order = p.coefficients.size();
  std::vector<double> y(excitation.size(), 0.0);
  for (std::size_t n = 0; n < y.size(); ++n) {
    double v = excitation[n];
    for (std::size_t k = 0; k < order && k < n; ++k) v -= p.coefficients[k] * y[n - 1 - k];
    y[n] = v;
  }
  return y;
}

}  // namespace mambattn::lpc
