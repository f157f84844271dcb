// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mambattn/error.hpp"

namespace mambattn {
namespace {

struct Coordinate {
  std::size_t tensor;
  std::size_t index;
};

double evaluate(const std::function<Tensor()>& f) {
  autograd::NoGrad no_grad;
  Tensor out = f();
  if (out.numel() != 1) {
    throw ShapeError("grad_check: function output " + to_string(out.shape()) +
                     " is not a scalar");
  }
  return out.item();
}

}  // namespace

GradCheckReport grad_check_params(const std::function<Tensor()>& f,
                                  std::vector<Tensor> params,
                                  const GradCheckOptions& opts) {
  if (!(opts.step > 0)) throw ShapeError("grad_check: step must be positive");
  GradCheckReport report;

  std::vector<bool> restore_flag;
  for (Tensor& p : params) {
    restore_flag.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.zero_grad();
  }
  std::vector<std::vector<double>> analytic(params.size());
  {
    autograd::GradScope scope;
    Tensor out = f();
    if (out.numel() != 1) {
      throw ShapeError("grad_check: function output " + to_string(out.shape()) +
                       " is not a scalar");
    }
    if (!std::isfinite(out.item())) {
      report.failure = "non-finite value at the base point";
      return report;
    }
    autograd::backward(out);
    for (std::size_t t = 0; t < params.size(); ++t) {
      if (params[t].has_grad()) {
        analytic[t].assign(params[t].grad().begin(), params[t].grad().end());
      } else {
        analytic[t].assign(params[t].numel(), 0.0);
      }
    }
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    params[t].zero_grad();
    params[t].set_requires_grad(restore_flag[t]);
  }

  std::vector<Coordinate> coords;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t].numel(); ++i) coords.push_back({t, i});
  if (opts.max_coordinates > 0 && coords.size() > opts.max_coordinates) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coordinates);
  }

  std::vector<double> numeric(coords.size());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    Tensor& p = params[coords[c].tensor];
    double& slot = p.data()[coords[c].index];
    const double saved = slot;
    slot = saved + opts.step;
    const double plus = evaluate(f);
    slot = saved - opts.step;
    const double minus = evaluate(f);
    slot = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      report.failure = "non-finite value probing tensor " +
                       std::to_string(coords[c].tensor) + " coordinate " +
                       std::to_string(coords[c].index);
      report.worst_tensor = coords[c].tensor;
      report.worst_index = coords[c].index;
      return report;
    }
    numeric[c] = (plus - minus) / (2.0 * opts.step);
  }

  double scale = 0.0;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    scale = std::max(scale, std::abs(analytic[coords[c].tensor][coords[c].index]));
    scale = std::max(scale, std::abs(numeric[c]));
  }
  const double floor = std::max(opts.relative_floor * scale, 1e-300);
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const double a = analytic[coords[c].tensor][coords[c].index];
    const double n = numeric[c];
    const double diff = std::abs(a - n);
    const double err = diff == 0.0 ? 0.0 : diff / std::max({std::abs(a), std::abs(n), floor});
    if (err > report.max_relative_error || c == 0) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      if (err >= report.max_relative_error) {
        report.worst_tensor = coords[c].tensor;
        report.worst_index = coords[c].index;
      }
    }
  }
  report.coordinates_checked = coords.size();
  report.passed = report.max_relative_error <= opts.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f,
                           const Tensor& x, const GradCheckOptions& opts) {
  Tensor probe = x;
  return grad_check_params([&] { return f(probe); }, {probe}, opts);
}

}  // namespace mambattn
