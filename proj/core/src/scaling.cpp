// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/scaling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>

#include "mambattn/attention.hpp"
#include "mambattn/error.hpp"
#include "mambattn/ops.hpp"

namespace mambattn::scaling {
namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

template <typename F>
double best_time(F&& fn, double min_seconds) {
  using clock = std::chrono::steady_clock;
  double best = std::numeric_limits<double>::infinity(), total = 0.0;
  int runs = 0;
  while (runs < 2 || total < min_seconds) {
    const auto t0 = clock::now();
    fn();
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    best = std::min(best, dt);
    total += dt;
    ++runs;
  }
  return best;
}

}  // namespace

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ShapeError("loglog_slope: need two or more matching points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

Report measure(const Options& opts) {
  if (opts.lengths.size() < 2 || !std::is_sorted(opts.lengths.begin(), opts.lengths.end())) {
    throw DataError("bench: need two or more ascending lengths");
  }
  autograd::NoGrad no_grad;
  std::mt19937_64 rng(opts.seed);
  nn::Rng wrng(opts.seed + 1);
  const std::size_t k = opts.d_model, n = opts.d_state;
  const attention::MhaWeights w(k, opts.heads, true, wrng);
  const Tensor a = random_tensor({n, k}, rng, -2.0, -0.1);

  Report r;
  std::vector<double> xs, scan_t, attn_t;
  for (std::size_t len : opts.lengths) {
    const Tensor x = random_tensor({1, len, k}, rng, -1.0, 1.0);
    const Tensor delta = random_tensor({1, len, k}, rng, 0.001, 0.1);
    const Tensor b = random_tensor({1, len, n}, rng, -1.0, 1.0);
    const Tensor c = random_tensor({1, len, n}, rng, -1.0, 1.0);
    const double ts =
        best_time([&] { (void)ops::selective_scan(x, delta, a, b, c); }, opts.min_seconds);
    const double ta = best_time(
        [&] { (void)attention::multi_head_attention_inference(x, w); }, opts.min_seconds);
    r.rows.push_back({"scan", len, ts});
    r.rows.push_back({"attention", len, ta});
    xs.push_back(static_cast<double>(len));
    scan_t.push_back(ts);
    attn_t.push_back(ta);
  }
  r.scan_slope = loglog_slope(xs, scan_t);
  r.attention_slope = loglog_slope(xs, attn_t);
  return r;
}

void write_csv(std::ostream& out, const Report& r) {
  out << "op,length,seconds\n" << std::setprecision(9);
  for (const auto& row : r.rows) out << row.op << ',' << row.length << ',' << row.seconds << '\n';
}

}  // namespace mambattn::scaling
