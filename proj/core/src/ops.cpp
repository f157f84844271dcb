// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mambattn/error.hpp"
#include "mambattn/kernels.hpp"

namespace mambattn::ops {
namespace {

using autograd::Node;

[[noreturn]] void shape_fail(std::string_view op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

void require_defined(std::string_view op, const Tensor& t,
                     std::string_view role) {
  if (!t.defined()) shape_fail(op, std::string(role) + " is undefined");
}

std::size_t norm_axis(std::string_view op, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for shape " +
                       to_string(x.shape()));
  }
  return axis;
}

// Outer/inner extents around one axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// ---------------------------------------------------------------------------
// Broadcasting

struct BroadcastPlan {
  Shape out;
  bool identical = false;
  std::vector<std::size_t> ia, ib;  // filled only when !identical
};

BroadcastPlan plan_broadcast(std::string_view op, const Shape& a,
                             const Shape& b) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.identical = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      shape_fail(op, "cannot broadcast " + to_string(a) + " with " +
                         to_string(b) + " at axis " + std::to_string(i));
    }
  }
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : stride_a;
    sb[i] = pb[i] == 1 ? 0 : stride_b;
    stride_a *= pa[i];
    stride_b *= pb[i];
  }
  const std::size_t n = numel(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    plan.ia[idx] = oa;
    plan.ib[idx] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < plan.out[d]) {
        oa += sa[d];
        ob += sb[d];
        break;
      }
      oa -= sa[d] * (plan.out[d] - 1);
      ob -= sb[d] * (plan.out[d] - 1);
      counter[d] = 0;
    }
  }
  return plan;
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(std::string_view op, BinaryKind kind, const Tensor& a,
              const Tensor& b) {
  require_defined(op, a, "lhs");
  require_defined(op, b, "rhs");
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(op, a.shape(), b.shape()));
  Tensor out(plan->out);
  auto y = out.data();
  auto da = a.data();
  auto db = b.data();
  const std::size_t n = y.size();
  auto apply = [kind](double u, double v) {
    switch (kind) {
      case BinaryKind::kAdd: return u + v;
      case BinaryKind::kSub: return u - v;
      case BinaryKind::kMul: return u * v;
    }
    return 0.0;
  };
  if (plan->identical) {
    for (std::size_t i = 0; i < n; ++i) y[i] = apply(da[i], db[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = apply(da[plan->ia[i]], db[plan->ib[i]]);
  }
  if (autograd::should_record({a, b})) {
    autograd::record(op, {a, b}, out, [plan, kind](Node& node) {
      Tensor& lhs = node.inputs[0];
      Tensor& rhs = node.inputs[1];
      auto g = node.output.grad();
      const std::size_t count = g.size();
      auto ia = [&](std::size_t i) { return plan->identical ? i : plan->ia[i]; };
      auto ib = [&](std::size_t i) { return plan->identical ? i : plan->ib[i]; };
      if (lhs.requires_grad()) {
        auto ga = lhs.mutable_grad();
        if (kind == BinaryKind::kMul) {
          auto vb = rhs.data();
          for (std::size_t i = 0; i < count; ++i) ga[ia(i)] += g[i] * vb[ib(i)];
        } else {
          for (std::size_t i = 0; i < count; ++i) ga[ia(i)] += g[i];
        }
      }
      if (rhs.requires_grad()) {
        auto gb = rhs.mutable_grad();
        if (kind == BinaryKind::kMul) {
          auto va = lhs.data();
          for (std::size_t i = 0; i < count; ++i) gb[ib(i)] += g[i] * va[ia(i)];
        } else if (kind == BinaryKind::kSub) {
          for (std::size_t i = 0; i < count; ++i) gb[ib(i)] -= g[i];
        } else {
          for (std::size_t i = 0; i < count; ++i) gb[ib(i)] += g[i];
        }
      }
    });
  }
  return out;
}

// Unary elementwise op; `deriv(x, y)` is dy/dx at one element.
template <class F, class D>
Tensor unary(std::string_view op, const Tensor& x, F f, D deriv) {
  require_defined(op, x, "input");
  Tensor out(x.shape());
  auto y = out.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xs[i]);
  if (autograd::should_record({x})) {
    autograd::record(op, {x}, out, [deriv](Node& node) {
      auto g = node.output.grad();
      auto yv = node.output.data();
      auto xv = node.inputs[0].data();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
    });
  }
  return out;
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double stable_softplus(double v) {
  if (v > 30.0) return v;
  if (v < -30.0) return std::exp(v);
  return std::log1p(std::exp(v));
}

double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_residual(double t) { return t - kTwoPi * std::round(t / kTwoPi); }

Shape reduced_shape(const Shape& shape, const std::vector<bool>& reduce,
                    bool keepdims) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!reduce[i]) {
      out.push_back(shape[i]);
    } else if (keepdims) {
      out.push_back(1);
    }
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", BinaryKind::kAdd, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", BinaryKind::kSub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", BinaryKind::kMul, a, b);
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary("softplus", x, stable_softplus,
               [](double v, double) { return stable_sigmoid(v); });
}

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](double v) { return v * stable_sigmoid(v); },
      [](double v, double) {
        const double s = stable_sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return sign_of(v); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor cos(const Tensor& x) {
  return unary(
      "cos", x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Tensor sin(const Tensor& x) {
  return unary(
      "sin", x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Tensor power(const Tensor& x, double exponent) {
  require_defined("power", x, "input");
  for (double v : x.data()) {
    if (!(v >= 0.0)) {
      shape_fail("power", "base must be nonnegative, got " + std::to_string(v));
    }
  }
  const bool soften = exponent < 1.0;
  return unary(
      "power", x, [exponent](double v) { return std::pow(v, exponent); },
      [exponent, soften](double v, double) {
        const double base = soften ? v + kPowerEpsilon : v;
        return exponent * std::pow(base, exponent - 1.0);
      });
}

Tensor anti_wrap(const Tensor& x) {
  return unary(
      "anti_wrap", x, [](double v) { return std::abs(wrap_residual(v)); },
      [](double v, double) { return sign_of(wrap_residual(v)); });
}

Tensor atan2(const Tensor& y, const Tensor& x) {
  require_defined("atan2", y, "y");
  require_defined("atan2", x, "x");
  if (y.shape() != x.shape()) {
    shape_fail("atan2", "y " + to_string(y.shape()) + " vs x " +
                            to_string(x.shape()));
  }
  Tensor out(y.shape());
  auto o = out.data();
  auto yv = y.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = (yv[i] == 0.0 && xv[i] == 0.0) ? 0.0 : std::atan2(yv[i], xv[i]);
  }
  if (autograd::should_record({y, x})) {
    autograd::record("atan2", {y, x}, out, [](Node& node) {
      auto g = node.output.grad();
      auto yv = node.inputs[0].data();
      auto xv = node.inputs[1].data();
      const bool need_y = node.inputs[0].requires_grad();
      const bool need_x = node.inputs[1].requires_grad();
      std::span<double> gy, gx;
      if (need_y) gy = node.inputs[0].mutable_grad();
      if (need_x) gx = node.inputs[1].mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double r2 = xv[i] * xv[i] + yv[i] * yv[i];
        if (r2 == 0.0) continue;
        if (need_y) gy[i] += g[i] * xv[i] / r2;
        if (need_x) gx[i] -= g[i] * yv[i] / r2;
      }
    });
  }
  return out;
}

Tensor prelu(const Tensor& x, const Tensor& slope, std::size_t channel_axis) {
  require_defined("prelu", x, "input");
  require_defined("prelu", slope, "slope");
  norm_axis("prelu", x, channel_axis);
  const AxisSplit s = split_at(x.shape(), channel_axis);
  const bool shared = slope.numel() == 1;
  if (!shared && slope.numel() != s.extent) {
    shape_fail("prelu", "slope has " + std::to_string(slope.numel()) +
                            " entries but channel axis " +
                            std::to_string(channel_axis) + " of " +
                            to_string(x.shape()) + " has " +
                            std::to_string(s.extent));
  }
  Tensor out(x.shape());
  auto y = out.data();
  auto xv = x.data();
  auto a = slope.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < s.extent; ++c) {
      const double alpha = a[shared ? 0 : c];
      const std::size_t base = (o * s.extent + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double v = xv[base + i];
        y[base + i] = v > 0 ? v : alpha * v;
      }
    }
  if (autograd::should_record({x, slope})) {
    autograd::record("prelu", {x, slope}, out, [s, shared](Node& node) {
      auto g = node.output.grad();
      auto xv = node.inputs[0].data();
      auto a = node.inputs[1].data();
      const bool need_x = node.inputs[0].requires_grad();
      const bool need_a = node.inputs[1].requires_grad();
      std::span<double> gx, ga;
      if (need_x) gx = node.inputs[0].mutable_grad();
      if (need_a) ga = node.inputs[1].mutable_grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t c = 0; c < s.extent; ++c) {
          const std::size_t ci = shared ? 0 : c;
          const double alpha = a[ci];
          const std::size_t base = (o * s.extent + c) * s.inner;
          double acc = 0.0;
          for (std::size_t i = 0; i < s.inner; ++i) {
            const double v = xv[base + i];
            if (v > 0) {
              if (need_x) gx[base + i] += g[base + i];
            } else {
              if (need_x) gx[base + i] += g[base + i] * alpha;
              acc += g[base + i] * v;
            }
          }
          if (need_a) ga[ci] += acc;
        }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  require_defined("softmax", x, "input");
  if (x.rank() == 0) shape_fail("softmax", "scalar input has no last axis");
  const std::size_t n = x.shape().back();
  if (n == 0) shape_fail("softmax", "last axis is empty");
  const std::size_t rows = x.numel() / n;
  Tensor out(x.shape());
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = y.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = std::exp(in[i] - mx);
      total += o[i];
    }
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < n; ++i) o[i] *= inv;
  }
  if (autograd::should_record({x})) {
    autograd::record("softmax", {x}, out, [rows, n](Node& node) {
      auto g = node.output.grad();
      auto y = node.output.data();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * n;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += g[base + i] * y[base + i];
        for (std::size_t i = 0; i < n; ++i)
          gx[base + i] += y[base + i] * (g[base + i] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_defined("layer_norm", x, "input");
  if (x.rank() == 0) shape_fail("layer_norm", "scalar input");
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) {
    shape_fail("layer_norm", "gamma/beta length must equal last axis " +
                                 std::to_string(n) + " of " +
                                 to_string(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  auto y = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += in[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = (in[i] - mu) * is;
      (*xhat)[r * n + i] = h;
      y[r * n + i] = h * gv[i] + bv[i];
    }
  }
  if (autograd::should_record({x, gamma, beta})) {
    autograd::record("layer_norm", {x, gamma, beta}, out,
                     [xhat, inv_std, rows, n](Node& node) {
      auto g = node.output.grad();
      auto gv = node.inputs[1].data();
      const bool need_x = node.inputs[0].requires_grad();
      const bool need_g = node.inputs[1].requires_grad();
      const bool need_b = node.inputs[2].requires_grad();
      std::span<double> gx, gg, gb;
      if (need_x) gx = node.inputs[0].mutable_grad();
      if (need_g) gg = node.inputs[1].mutable_grad();
      if (need_b) gb = node.inputs[2].mutable_grad();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * n;
        double sum_d = 0.0, sum_dh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = g[base + i] * gv[i];
          sum_d += d;
          sum_dh += d * (*xhat)[base + i];
          if (need_g) gg[i] += g[base + i] * (*xhat)[base + i];
          if (need_b) gb[i] += g[base + i];
        }
        if (need_x) {
          const double is = (*inv_std)[r];
          for (std::size_t i = 0; i < n; ++i) {
            const double d = g[base + i] * gv[i];
            gx[base + i] += is * (d - inv_n * sum_d -
                                  (*xhat)[base + i] * inv_n * sum_dh);
          }
        }
      }
    });
  }
  return out;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps) {
  require_defined("instance_norm", x, "input");
  if (x.rank() != 4) {
    shape_fail("instance_norm", "expected M x C x H x W, got " +
                                    to_string(x.shape()));
  }
  const std::size_t m = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    shape_fail("instance_norm", "gamma/beta length must equal channels " +
                                    std::to_string(c));
  }
  if (plane == 0) shape_fail("instance_norm", "empty spatial plane");
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(m * c);
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  auto y = out.data();
  for (std::size_t s = 0; s < m * c; ++s) {
    const std::size_t ch = s % c;
    const double* in = xv.data() + s * plane;
    double mu = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mu += in[i];
    mu /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[s] = is;
    for (std::size_t i = 0; i < plane; ++i) {
      const double h = (in[i] - mu) * is;
      (*xhat)[s * plane + i] = h;
      y[s * plane + i] = h * gv[ch] + bv[ch];
    }
  }
  if (autograd::should_record({x, gamma, beta})) {
    autograd::record("instance_norm", {x, gamma, beta}, out,
                     [xhat, inv_std, m, c, plane](Node& node) {
      auto g = node.output.grad();
      auto gv = node.inputs[1].data();
      const bool need_x = node.inputs[0].requires_grad();
      const bool need_g = node.inputs[1].requires_grad();
      const bool need_b = node.inputs[2].requires_grad();
      std::span<double> gx, gg, gb;
      if (need_x) gx = node.inputs[0].mutable_grad();
      if (need_g) gg = node.inputs[1].mutable_grad();
      if (need_b) gb = node.inputs[2].mutable_grad();
      const double inv_n = 1.0 / static_cast<double>(plane);
      for (std::size_t s = 0; s < m * c; ++s) {
        const std::size_t ch = s % c;
        const std::size_t base = s * plane;
        double sum_g = 0.0, sum_gh = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_g += g[base + i];
          sum_gh += g[base + i] * (*xhat)[base + i];
        }
        if (need_g) gg[ch] += sum_gh;
        if (need_b) gb[ch] += sum_g;
        if (need_x) {
          const double is = (*inv_std)[s] * gv[ch];
          for (std::size_t i = 0; i < plane; ++i) {
            gx[base + i] += is * (g[base + i] - inv_n * sum_g -
                                  (*xhat)[base + i] * inv_n * sum_gh);
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products

namespace {

struct MatmulGeometry {
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  bool shared_b = false;
  Shape out;
};

MatmulGeometry matmul_geometry(const Tensor& a, const Tensor& b, bool ta,
                               bool tb) {
  if (a.rank() < 2 || b.rank() < 2) {
    shape_fail("matmul", "operands need rank >= 2, got " + to_string(a.shape()) +
                             " and " + to_string(b.shape()));
  }
  MatmulGeometry g;
  const std::size_t ar = a.rank(), br = b.rank();
  g.m = ta ? a.dim(ar - 1) : a.dim(ar - 2);
  g.k = ta ? a.dim(ar - 2) : a.dim(ar - 1);
  const std::size_t bk = tb ? b.dim(br - 1) : b.dim(br - 2);
  g.n = tb ? b.dim(br - 2) : b.dim(br - 1);
  if (bk != g.k) {
    shape_fail("matmul", "inner dimension k mismatch: " + std::to_string(g.k) +
                             " (lhs " + to_string(a.shape()) + ") vs " +
                             std::to_string(bk) + " (rhs " +
                             to_string(b.shape()) + ")");
  }
  for (std::size_t i = 0; i + 2 < ar; ++i) g.batch *= a.dim(i);
  g.shared_b = br == 2;
  if (!g.shared_b) {
    if (br != ar || !std::equal(a.shape().begin(), a.shape().end() - 2,
                                b.shape().begin())) {
      shape_fail("matmul", "batch axes differ: " + to_string(a.shape()) +
                               " vs " + to_string(b.shape()));
    }
  }
  g.out.assign(a.shape().begin(), a.shape().end() - 2);
  g.out.push_back(g.m);
  g.out.push_back(g.n);
  return g;
}

// Returns a pointer to the effective (rows x cols) operand, transposing
// `src` (stored cols x rows) into `buf` when needed.
const double* effective(const double* src, std::size_t rows, std::size_t cols,
                        bool transposed, std::vector<double>& buf) {
  if (!transposed) return src;
  buf.resize(rows * cols);
  kernels::transpose(src, cols, rows, buf.data());
  return buf.data();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a,
              bool transpose_b) {
  require_defined("matmul", a, "lhs");
  require_defined("matmul", b, "rhs");
  const MatmulGeometry geo = matmul_geometry(a, b, transpose_a, transpose_b);
  Tensor out(geo.out);
  const std::size_t sa = geo.m * geo.k, sb = geo.k * geo.n, sc = geo.m * geo.n;
  std::vector<double> abuf, bbuf;
  const double* av = a.data().data();
  const double* bv = b.data().data();
  double* cv = out.data().data();
  if (geo.shared_b && !transpose_a) {
    const double* beff = effective(bv, geo.k, geo.n, transpose_b, bbuf);
    kernels::gemm(geo.batch * geo.m, geo.n, geo.k, av, geo.k, beff, geo.n, cv,
                  geo.n, false);
  } else {
    const double* beff = nullptr;
    if (geo.shared_b) beff = effective(bv, geo.k, geo.n, transpose_b, bbuf);
    for (std::size_t p = 0; p < geo.batch; ++p) {
      const double* aeff = effective(av + p * sa, geo.m, geo.k, transpose_a, abuf);
      if (!geo.shared_b) beff = effective(bv + p * sb, geo.k, geo.n, transpose_b, bbuf);
      kernels::gemm(geo.m, geo.n, geo.k, aeff, geo.k, beff, geo.n, cv + p * sc,
                    geo.n, false);
    }
  }
  if (autograd::should_record({a, b})) {
    autograd::record("matmul", {a, b}, out,
                     [geo, transpose_a, transpose_b](Node& node) {
      const std::size_t sa = geo.m * geo.k, sb = geo.k * geo.n, sc = geo.m * geo.n;
      const double* g = node.output.grad().data();
      const double* av = node.inputs[0].data().data();
      const double* bv = node.inputs[1].data().data();
      const bool need_a = node.inputs[0].requires_grad();
      const bool need_b = node.inputs[1].requires_grad();
      double* ga = need_a ? node.inputs[0].mutable_grad().data() : nullptr;
      double* gb = need_b ? node.inputs[1].mutable_grad().data() : nullptr;
      std::vector<double> aeff_buf, beff_buf, bT(geo.n * geo.k), aT, tmp;
      if (geo.shared_b && !transpose_a) {
        // Rows of A across the batch form one (batch*m) x k matrix.
        const std::size_t rows = geo.batch * geo.m;
        if (need_a) {
          const double* beff = effective(bv, geo.k, geo.n, transpose_b, beff_buf);
          kernels::transpose(beff, geo.k, geo.n, bT.data());
          kernels::gemm(rows, geo.k, geo.n, g, geo.n, bT.data(), geo.k, ga, geo.k, true);
        }
        if (need_b) {
          aT.resize(geo.k * rows);
          kernels::transpose(av, rows, geo.k, aT.data());
          if (!transpose_b) {
            kernels::gemm(geo.k, geo.n, rows, aT.data(), rows, g, geo.n, gb, geo.n, true);
          } else {
            tmp.assign(geo.k * geo.n, 0.0);
            kernels::gemm(geo.k, geo.n, rows, aT.data(), rows, g, geo.n, tmp.data(), geo.n,
                          false);
            for (std::size_t i = 0; i < geo.k; ++i)
              for (std::size_t j = 0; j < geo.n; ++j) gb[j * geo.k + i] += tmp[i * geo.n + j];
          }
        }
        return;
      }
      aT.resize(geo.k * geo.m);
      if (geo.shared_b && need_a) {
        const double* beff = effective(bv, geo.k, geo.n, transpose_b, beff_buf);
        kernels::transpose(beff, geo.k, geo.n, bT.data());
      }
      for (std::size_t p = 0; p < geo.batch; ++p) {
        const double* gp = g + p * sc;
        const double* bsrc = geo.shared_b ? bv : bv + p * sb;
        const double* asrc = av + p * sa;
        if (need_a) {
          // dA_eff (m x k) = dC (m x n) * B_eff^T (n x k)
          if (!geo.shared_b) {
            const double* beff = effective(bsrc, geo.k, geo.n, transpose_b, beff_buf);
            kernels::transpose(beff, geo.k, geo.n, bT.data());
          }
          double* gap = ga + p * sa;
          if (!transpose_a) {
            kernels::gemm(geo.m, geo.k, geo.n, gp, geo.n, bT.data(), geo.k, gap,
                          geo.k, true);
          } else {
            tmp.assign(geo.m * geo.k, 0.0);
            kernels::gemm(geo.m, geo.k, geo.n, gp, geo.n, bT.data(), geo.k,
                          tmp.data(), geo.k, false);
            for (std::size_t i = 0; i < geo.m; ++i)
              for (std::size_t j = 0; j < geo.k; ++j)
                gap[j * geo.m + i] += tmp[i * geo.k + j];
          }
        }
        if (need_b) {
          // dB_eff (k x n) = A_eff^T (k x m) * dC (m x n)
          const double* aeff = effective(asrc, geo.m, geo.k, transpose_a, aeff_buf);
          kernels::transpose(aeff, geo.m, geo.k, aT.data());
          double* gbp = geo.shared_b ? gb : gb + p * sb;
          if (!transpose_b) {
            kernels::gemm(geo.k, geo.n, geo.m, aT.data(), geo.m, gp, geo.n, gbp,
                          geo.n, true);
          } else {
            tmp.assign(geo.k * geo.n, 0.0);
            kernels::gemm(geo.k, geo.n, geo.m, aT.data(), geo.m, gp, geo.n,
                          tmp.data(), geo.n, false);
            for (std::size_t i = 0; i < geo.k; ++i)
              for (std::size_t j = 0; j < geo.n; ++j)
                gbp[j * geo.k + i] += tmp[i * geo.n + j];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  const Shape& first = parts[0].shape();
  norm_axis("concat", parts[0], axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    require_defined("concat", p, "part");
    if (p.rank() != first.size()) {
      shape_fail("concat", "rank mismatch " + to_string(first) + " vs " +
                               to_string(p.shape()));
    }
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.dim(d) != first[d]) {
        shape_fail("concat", "axis " + std::to_string(d) + " mismatch " +
                                 to_string(first) + " vs " +
                                 to_string(p.shape()));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  Tensor out(out_shape);
  const AxisSplit os = split_at(out_shape, axis);
  auto y = out.data();
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t ext = p.dim(axis);
    auto pv = p.data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pv.data() + o * ext * os.inner, ext * os.inner,
                  y.data() + (o * os.extent + offset) * os.inner);
    }
    offset += ext;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  if (autograd::should_record(parts)) {
    autograd::record("concat", std::move(inputs), out,
                     [os, offsets, axis](Node& node) {
      auto g = node.output.grad();
      for (std::size_t idx = 0; idx < node.inputs.size(); ++idx) {
        Tensor& p = node.inputs[idx];
        if (!p.requires_grad()) continue;
        const std::size_t ext = p.dim(axis);
        auto gp = p.mutable_grad();
        for (std::size_t o = 0; o < os.outer; ++o) {
          const double* src = g.data() + (o * os.extent + offsets[idx]) * os.inner;
          double* dst = gp.data() + o * ext * os.inner;
          for (std::size_t i = 0; i < ext * os.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined("reshape", x, "input");
  if (numel(shape) != x.numel()) {
    shape_fail("reshape", "cannot view " + to_string(x.shape()) + " as " +
                              to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (autograd::should_record({x})) {
    autograd::record("reshape", {x}, out, [](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

namespace {

// For each output element, the flat index of the source element.
std::vector<std::size_t> permutation_index(const Shape& in,
                                           const std::vector<std::size_t>& order,
                                           Shape& out_shape) {
  const std::size_t rank = in.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_stride[d - 1] = in_stride[d] * in[d];
  out_shape.resize(rank);
  std::vector<std::size_t> stride(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    out_shape[d] = in[order[d]];
    stride[d] = in_stride[order[d]];
  }
  const std::size_t n = numel(in);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index[i] = src;
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < out_shape[d]) {
        src += stride[d];
        break;
      }
      src -= stride[d] * (out_shape[d] - 1);
      counter[d] = 0;
    }
  }
  return index;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  require_defined("permute", x, "input");
  if (order.size() != x.rank()) {
    shape_fail("permute", "order has " + std::to_string(order.size()) +
                              " axes for shape " + to_string(x.shape()));
  }
  std::vector<bool> seen(order.size(), false);
  for (std::size_t d : order) {
    if (d >= order.size() || seen[d]) shape_fail("permute", "order is not a permutation");
    seen[d] = true;
  }
  Shape out_shape;
  auto index = std::make_shared<std::vector<std::size_t>>(
      permutation_index(x.shape(), order, out_shape));
  Tensor out(out_shape);
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[(*index)[i]];
  if (autograd::should_record({x})) {
    autograd::record("permute", {x}, out, [index](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[(*index)[i]] += g[i];
    });
  }
  return out;
}

Tensor transpose(const Tensor& x, std::size_t axis0, std::size_t axis1) {
  require_defined("transpose", x, "input");
  norm_axis("transpose", x, axis0);
  norm_axis("transpose", x, axis1);
  std::vector<std::size_t> order(x.rank());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::swap(order[axis0], order[axis1]);
  return permute(x, order);
}

Tensor flip(const Tensor& x, std::size_t axis) {
  require_defined("flip", x, "input");
  norm_axis("flip", x, axis);
  const AxisSplit s = split_at(x.shape(), axis);
  Tensor out(x.shape());
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      std::copy_n(xv.data() + (o * s.extent + e) * s.inner, s.inner,
                  y.data() + (o * s.extent + (s.extent - 1 - e)) * s.inner);
  if (autograd::should_record({x})) {
    autograd::record("flip", {x}, out, [s](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e) {
          const double* src = g.data() + (o * s.extent + (s.extent - 1 - e)) * s.inner;
          double* dst = gx.data() + (o * s.extent + e) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  require_defined("slice", x, "input");
  norm_axis("slice", x, axis);
  if (begin > end || end > x.dim(axis)) {
    shape_fail("slice", "range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") invalid for axis " +
                            std::to_string(axis) + " of " + to_string(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const std::size_t len = end - begin;
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xv.data() + (o * s.extent + begin) * s.inner, len * s.inner,
                y.data() + o * len * s.inner);
  if (autograd::should_record({x})) {
    autograd::record("slice", {x}, out, [s, begin, len](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        const double* src = g.data() + o * len * s.inner;
        double* dst = gx.data() + (o * s.extent + begin) * s.inner;
        for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  require_defined("sum", x, "input");
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (autograd::should_record({x})) {
    autograd::record("sum", {x}, out, [](Node& node) {
      const double g = node.output.grad()[0];
      for (double& v : node.inputs[0].mutable_grad()) v += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) shape_fail("mean", "empty input");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes,
           bool keepdims) {
  require_defined("sum", x, "input");
  std::vector<bool> reduce(x.rank(), false);
  for (std::size_t a : axes) reduce[norm_axis("sum", x, a)] = true;
  const Shape out_shape = reduced_shape(x.shape(), reduce, keepdims);
  // Map each input element to its output slot.
  const std::size_t rank = x.rank();
  std::vector<std::size_t> out_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t d = rank; d-- > 0;) {
    if (!reduce[d]) {
      out_stride[d] = stride;
      stride *= x.dim(d);
    }
  }
  auto index = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> counter(rank, 0);
  std::size_t dst = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    (*index)[i] = dst;
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < x.dim(d)) {
        dst += out_stride[d];
        break;
      }
      dst -= out_stride[d] * (x.dim(d) - 1);
      counter[d] = 0;
    }
  }
  Tensor out(out_shape);
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) y[(*index)[i]] += xv[i];
  if (autograd::should_record({x})) {
    autograd::record("sum_axes", {x}, out, [index](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[(*index)[i]];
    });
  }
  return out;
}

Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes,
            bool keepdims) {
  std::size_t count = 1;
  for (std::size_t a : axes) count *= x.shape().at(a);
  if (count == 0) shape_fail("mean", "empty reduction");
  return scale(sum(x, axes, keepdims), 1.0 / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Gather / scatter along the last axis

Tensor gather_last(const Tensor& x, const std::vector<std::size_t>& index) {
  require_defined("gather_last", x, "input");
  if (x.rank() == 0) shape_fail("gather_last", "scalar input");
  const std::size_t n = x.shape().back();
  for (std::size_t i : index) {
    if (i >= n) {
      shape_fail("gather_last", "index " + std::to_string(i) +
                                    " out of range for last axis " +
                                    std::to_string(n));
    }
  }
  const std::size_t rows = n == 0 ? 0 : x.numel() / n;
  Shape out_shape = x.shape();
  out_shape.back() = index.size();
  Tensor out(out_shape);
  auto y = out.data();
  auto xv = x.data();
  const std::size_t m = index.size();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < m; ++j) y[r * m + j] = xv[r * n + index[j]];
  if (autograd::should_record({x})) {
    auto idx = std::make_shared<std::vector<std::size_t>>(index);
    autograd::record("gather_last", {x}, out, [idx, rows, n](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      const std::size_t m = idx->size();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < m; ++j) gx[r * n + (*idx)[j]] += g[r * m + j];
    });
  }
  return out;
}

Tensor scatter_add_last(const Tensor& x, const std::vector<std::size_t>& index,
                        std::size_t n) {
  require_defined("scatter_add_last", x, "input");
  if (x.rank() == 0 || x.shape().back() != index.size()) {
    shape_fail("scatter_add_last", "last axis of " + to_string(x.shape()) +
                                       " must equal index length " +
                                       std::to_string(index.size()));
  }
  for (std::size_t i : index) {
    if (i >= n) shape_fail("scatter_add_last", "index out of range");
  }
  const std::size_t m = index.size();
  const std::size_t rows = m == 0 ? 0 : x.numel() / m;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < m; ++j) y[r * n + index[j]] += xv[r * m + j];
  if (autograd::should_record({x})) {
    auto idx = std::make_shared<std::vector<std::size_t>>(index);
    autograd::record("scatter_add_last", {x}, out, [idx, rows, n](Node& node) {
      auto g = node.output.grad();
      auto gx = node.inputs[0].mutable_grad();
      const std::size_t m = idx->size();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < m; ++j) gx[r * m + j] += g[r * n + (*idx)[j]];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Selective scan

Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a,
                      const Tensor& b, const Tensor& c) {
  constexpr std::string_view op = "selective_scan";
  require_defined(op, x, "x");
  require_defined(op, delta, "delta");
  require_defined(op, a, "A");
  require_defined(op, b, "B");
  require_defined(op, c, "C");
  if (x.rank() != 3) shape_fail(op, "x must be Bt x L x K, got " + to_string(x.shape()));
  const std::size_t bt = x.dim(0), len = x.dim(1), k = x.dim(2);
  if (delta.shape() != x.shape()) {
    shape_fail(op, "delta " + to_string(delta.shape()) + " must match x " +
                       to_string(x.shape()));
  }
  if (a.rank() != 2 || a.dim(1) != k) {
    shape_fail(op, "A must be N x K with K=" + std::to_string(k) + ", got " +
                       to_string(a.shape()));
  }
  const std::size_t n = a.dim(0);
  const Shape bc{bt, len, n};
  if (b.shape() != bc || c.shape() != bc) {
    shape_fail(op, "B and C must be Bt x L x N = " + to_string(bc) + ", got " +
                       to_string(b.shape()) + " and " + to_string(c.shape()));
  }
  Tensor out(x.shape());
  const bool keep = autograd::should_record({x, delta, a, b, c});
  // Hidden states h_1..h_L per batch element, kept for the reverse pass.
  auto states = std::make_shared<std::vector<double>>();
  if (keep) states->resize(bt * len * n * k);
  const double* xv = x.data().data();
  const double* dv = delta.data().data();
  const double* av = a.data().data();
  const double* bv = b.data().data();
  const double* cv = c.data().data();
  double* y = out.data().data();
  std::vector<double> h(n * k);
  std::vector<double> u(k);
  for (std::size_t s = 0; s < bt; ++s) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t row = (s * len + i);
      const double* xi = xv + row * k;
      const double* di = dv + row * k;
      const double* bi = bv + row * n;
      const double* ci = cv + row * n;
      double* yi = y + row * k;
      for (std::size_t j = 0; j < k; ++j) u[j] = di[j] * xi[j];
      std::fill(yi, yi + k, 0.0);
      for (std::size_t p = 0; p < n; ++p) {
        double* hp = h.data() + p * k;
        const double* ap = av + p * k;
        const double bp = bi[p], cp = ci[p];
        for (std::size_t j = 0; j < k; ++j) {
          hp[j] = std::exp(di[j] * ap[j]) * hp[j] + bp * u[j];
          yi[j] += cp * hp[j];
        }
      }
      if (keep) std::copy(h.begin(), h.end(), states->begin() + row * n * k);
    }
  }
  if (keep) {
    autograd::record(op, {x, delta, a, b, c}, out,
                     [states, bt, len, n, k](Node& node) {
      const double* g = node.output.grad().data();
      const double* xv = node.inputs[0].data().data();
      const double* dv = node.inputs[1].data().data();
      const double* av = node.inputs[2].data().data();
      const double* bv = node.inputs[3].data().data();
      const double* cv = node.inputs[4].data().data();
      auto grad_ptr = [&](std::size_t idx) -> double* {
        return node.inputs[idx].requires_grad()
                   ? node.inputs[idx].mutable_grad().data()
                   : nullptr;
      };
      double* gx = grad_ptr(0);
      double* gd = grad_ptr(1);
      double* ga = grad_ptr(2);
      double* gb = grad_ptr(3);
      double* gc = grad_ptr(4);
      std::vector<double> gh(n * k), du(k), decay(n * k);
      for (std::size_t s = 0; s < bt; ++s) {
        std::fill(gh.begin(), gh.end(), 0.0);
        for (std::size_t i = len; i-- > 0;) {
          const std::size_t row = s * len + i;
          const double* xi = xv + row * k;
          const double* di = dv + row * k;
          const double* bi = bv + row * n;
          const double* ci = cv + row * n;
          const double* gy = g + row * k;
          const double* hi = states->data() + row * n * k;
          const double* hprev = i > 0 ? states->data() + (row - 1) * n * k : nullptr;
          std::fill(du.begin(), du.end(), 0.0);
          for (std::size_t p = 0; p < n; ++p) {
            double* ghp = gh.data() + p * k;
            const double* hp = hi + p * k;
            const double* ap = av + p * k;
            double dc = 0.0, db = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
              dc += hp[j] * gy[j];
              ghp[j] += ci[p] * gy[j];
              db += ghp[j] * di[j] * xi[j];
              du[j] += ghp[j] * bi[p];
              const double decay_pj = std::exp(di[j] * ap[j]);
              decay[p * k + j] = decay_pj;
              if (hprev != nullptr) {
                const double dab = ghp[j] * hprev[p * k + j] * decay_pj;
                if (gd != nullptr) gd[row * k + j] += dab * ap[j];
                if (ga != nullptr) ga[p * k + j] += dab * di[j];
              }
            }
            if (gc != nullptr) gc[row * n + p] += dc;
            if (gb != nullptr) gb[row * n + p] += db;
          }
          for (std::size_t j = 0; j < k; ++j) {
            if (gx != nullptr) gx[row * k + j] += du[j] * di[j];
            if (gd != nullptr) gd[row * k + j] += du[j] * xi[j];
          }
          for (std::size_t q = 0; q < n * k; ++q) gh[q] *= decay[q];
        }
      }
    });
  }
  return out;
}

}  // namespace mambattn::ops
