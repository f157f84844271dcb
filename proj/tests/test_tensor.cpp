// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <set>

#include "mambattn/error.hpp"
#include "mambattn/grad_check.hpp"
#include "mambattn/kernels.hpp"
#include "mambattn/ops.hpp"
#include "primitive_cases.hpp"
#include "test_util.hpp"

using namespace mambattn;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

std::vector<double> grad_of(const Tensor& x, const std::function<Tensor(const Tensor&)>& f) {
  Tensor p = x.clone();
  p.set_requires_grad(true);
  autograd::GradScope scope;
  autograd::backward(f(p));
  return {p.grad().begin(), p.grad().end()};
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
  Tensor x(Shape{1, 3}, 0.0);
  Tensor y = ops::softmax(x);
  for (double v : y.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("flip is an involution on every axis") {
  Tensor x = random_tensor({2, 3, 4}, 1);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    Tensor y = ops::flip(ops::flip(x, axis), axis);
    CHECK(testing::bit_identical(x.data(), y.data()));
  }
}

TEST_CASE("matmul matches a triple loop") {
  Tensor a = random_tensor({2, 3}, 2), b = random_tensor({3, 4}, 3);
  Tensor c = ops::matmul(a, b);
  std::vector<double> ref(8, 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 3; ++k) ref[i * 4 + j] += a.data()[i * 3 + k] * b.data()[k * 4 + j];
  CHECK(max_abs_diff(c.data(), ref) < 1e-12);
}

TEST_CASE("gemm is bit-identical to the naive ascending-k loop") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng() % 37, n = 1 + rng() % 41, k = 1 + rng() % 300;
    const bool acc = trial % 2 == 1;
    auto a = testing::uniform(m * k, rng()), b = testing::uniform(k * n, rng());
    auto c = testing::uniform(m * n, rng());
    auto ref = c;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = acc ? ref[i * n + j] : 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
        ref[i * n + j] = s;
      }
    kernels::gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, acc);
    CHECK(testing::bit_identical(c, ref));
  }
}

TEST_CASE("shape errors name the offending shapes") {
  Tensor a = random_tensor({2, 3}, 1), b = random_tensor({4, 5}, 2);
  CHECK_THROWS_AS(ops::matmul(a, b), ShapeError);
  CHECK_THROWS_AS(ops::add(a, b), ShapeError);
  CHECK_THROWS_AS(ops::apply_primitive("no_such_op", std::vector<Tensor>{a}), ShapeError);
  CHECK_THROWS_AS(ops::apply_primitive("scale", std::vector<Tensor>{a}), ShapeError);
}

TEST_CASE("backward of sum gives ones") {
  Tensor x = random_tensor({2, 3, 2}, 4);
  auto g = grad_of(x, [](const Tensor& t) { return ops::sum(t); });
  for (double v : g) CHECK(v == 1.0);
}

TEST_CASE("backward of sum of squares") {
  Tensor x(Shape{3}, std::vector<double>{1, 2, 3});
  auto g = grad_of(x, [](const Tensor& t) { return ops::sum(ops::mul(t, t)); });
  CHECK(g == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward of sum of softmax vanishes") {
  Tensor x = random_tensor({3, 5}, 5, -3, 3);
  auto g = grad_of(x, [](const Tensor& t) { return ops::sum(ops::softmax(t)); });
  for (double v : g) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("leaf gradients accumulate across backward calls") {
  Tensor x = Tensor::parameter({2}, {1.0, -1.0});
  for (int i = 0; i < 2; ++i) {
    autograd::GradScope scope;
    autograd::backward(ops::sum(ops::scale(x, 3.0)));
  }
  CHECK(x.grad()[0] == 6.0);
  CHECK(x.grad()[1] == 6.0);
}

TEST_CASE("no recording without a grad scope or under NoGrad") {
  Tensor x = Tensor::parameter({2}, {1.0, 2.0});
  autograd::GradScope scope;
  {
    autograd::NoGrad off;
    Tensor y = ops::exp(x);
    CHECK(y.is_leaf());
  }
  CHECK(scope.tape().size() == 0);
  Tensor y = ops::exp(x);
  CHECK_FALSE(y.is_leaf());
  CHECK(scope.tape().size() == 1);
}

TEST_CASE("power has a finite gradient at a zero base") {
  Tensor x = Tensor::parameter({2}, {0.0, 4.0});
  autograd::GradScope scope;
  Tensor y = ops::power(x, 0.3);
  CHECK(y.data()[0] == 0.0);
  CHECK(y.data()[1] == doctest::Approx(1.515717).epsilon(1e-6));
  autograd::backward(ops::sum(y));
  CHECK(std::isfinite(x.grad()[0]));
}

TEST_CASE("grad check of sigmoid sum") {
  Tensor x = random_tensor({2, 3}, 6);
  GradCheckOptions o;
  o.tolerance = 1e-6;
  auto rep = grad_check([](const Tensor& t) { return ops::sum(ops::sigmoid(t)); }, x, o);
  CHECK(rep.passed);
  CHECK(rep.max_relative_error < 1e-6);
}

TEST_CASE("grad check of layer norm then sum of squares") {
  Tensor x = random_tensor({4, 8}, 7);
  Tensor gamma = random_tensor({8}, 8, 0.5, 1.5), beta = random_tensor({8}, 9);
  auto rep = grad_check(
      [&](const Tensor& t) { return ops::sum(ops::square(ops::layer_norm(t, gamma, beta))); }, x);
  CHECK(rep.max_relative_error < 1e-5);
}

TEST_CASE("grad check of a constant function is exactly zero") {
  Tensor x = random_tensor({3}, 10);
  Tensor c = Tensor::scalar(2.5);
  auto rep = grad_check([&](const Tensor&) { return c; }, x);
  CHECK(rep.passed);
  CHECK(rep.max_relative_error == 0.0);
}

TEST_CASE("every registered primitive passes a finite-difference check") {
  const auto cases = testing::primitive_cases(1);
  std::set<std::string> covered;
  for (const auto& pc : cases) {
    CAPTURE(pc.name);
    auto rep = testing::check_primitive(pc, 1e-5);
    CHECK(rep.failure.empty());
    CHECK(rep.max_relative_error < 1e-5);
    covered.insert(pc.name);
  }
  for (const auto& name : ops::primitive_names()) {
    CAPTURE(name);
    CHECK(covered.count(name) == 1);
  }
}

TEST_CASE("primitives keep finite inputs finite") {
  for (const auto& pc : testing::primitive_cases(2)) {
    CAPTURE(pc.name);
    CHECK(testing::all_finite(ops::apply_primitive(pc.name, pc.inputs, pc.attrs).data()));
  }
}

TEST_CASE("conv2d matches a direct loop") {
  Tensor x = random_tensor({2, 3, 6, 7}, 11), w = random_tensor({4, 3, 3, 2}, 12),
         b = random_tensor({4}, 13);
  ops::Conv2dOptions o;
  o.stride = {2, 1};
  o.dilation = {1, 2};
  o.padding = {1, 0, 2, 1};
  Tensor y = ops::conv2d(x, w, b, o);
  const std::size_t oh = (6 + 1 + 0 - 3) / 2 + 1, ow = (7 + 2 + 1 - 2 * 1 - 1) / 1 + 1;
  REQUIRE(y.shape() == Shape{2, 4, oh, ow});
  std::vector<double> ref(y.numel(), 0.0);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t co = 0; co < 4; ++co)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = b.data()[co];
          for (std::size_t ci = 0; ci < 3; ++ci)
            for (std::size_t p = 0; p < 3; ++p)
              for (std::size_t q = 0; q < 2; ++q) {
                const long r = long(i * 2 + p) - 1, c = long(j + q * 2) - 2;
                if (r < 0 || r >= 6 || c < 0 || c >= 7) continue;
                s += x.data()[((m * 3 + ci) * 6 + r) * 7 + c] * w.data()[((co * 3 + ci) * 3 + p) * 2 + q];
              }
          ref[((m * 4 + co) * oh + i) * ow + j] = s;
        }
  CHECK(max_abs_diff(y.data(), ref) < 1e-12);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  // <conv(x), y> == <x, conv_transpose(y)> for matching options, no bias.
  Tensor x = random_tensor({1, 2, 7, 9}, 14), w = random_tensor({3, 2, 3, 3}, 15);
  ops::Conv2dOptions o;
  o.stride = {1, 2};
  o.padding = {1, 1, 0, 0};
  Tensor cx = ops::conv2d(x, w, Tensor(), o);
  Tensor y = random_tensor(cx.shape(), 16);
  Tensor ty = ops::conv_transpose2d(y, w, Tensor(), o);
  REQUIRE(ty.shape() == x.shape());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * y.data()[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * ty.data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
