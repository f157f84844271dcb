// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>

#include "mambattn/grad_check.hpp"
#include "mambattn/ops.hpp"
#include "mambattn/ssm.hpp"
#include "test_util.hpp"

using namespace mambattn;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

// h_i = exp(delta_i a) h_{i-1} + b_i (delta_i x_i), y_i = c_i h_i, one step at a time.
std::vector<double> naive_scan(const Tensor& x, const Tensor& delta, const Tensor& a,
                               const Tensor& b, const Tensor& c, bool forget = false) {
  const std::size_t bt = x.dim(0), len = x.dim(1), k = x.dim(2), n = a.dim(0);
  std::vector<double> y(bt * len * k, 0.0);
  for (std::size_t s = 0; s < bt; ++s) {
    std::vector<double> h(n * k, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < k; ++j) {
          const double d = delta.data()[(s * len + i) * k + j];
          const double decay = forget ? 0.0 : std::exp(d * a.data()[r * k + j]);
          h[r * k + j] = decay * h[r * k + j] +
                         b.data()[(s * len + i) * n + r] * d * x.data()[(s * len + i) * k + j];
        }
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += c.data()[(s * len + i) * n + r] * h[r * k + j];
        y[(s * len + i) * k + j] = acc;
      }
    }
  }
  return y;
}

ssm::MambaConfig small_config() {
  ssm::MambaConfig cfg;
  cfg.d_model = 4;
  cfg.expand = 2;
  cfg.d_state = 3;
  cfg.conv_width = 3;
  return cfg;
}

}  // namespace

TEST_CASE("zero-order hold") {
  SUBCASE("A = -1, delta = ln 2 halves the state") {
    auto d = ssm::discretize_zoh(std::vector<double>{-1.0}, std::vector<double>{1.0},
                                 std::vector<double>{std::log(2.0)}, 1, 1);
    CHECK(d.a_bar[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("A = -2, B = 3, delta = 0.1") {
    auto d = ssm::discretize_zoh(std::vector<double>{-2.0}, std::vector<double>{3.0},
                                 std::vector<double>{0.1}, 1, 1);
    CHECK(d.a_bar[0] == doctest::Approx(0.818731).epsilon(1e-6));
    CHECK(d.b_bar[0] == doctest::Approx(0.3).epsilon(1e-15));
  }
  SUBCASE("small delta tends to identity") {
    auto d = ssm::discretize_zoh(std::vector<double>{-3.0, -0.5}, std::vector<double>{2.0},
                                 std::vector<double>{1e-12, 1e-12}, 1, 2);
    for (double v : d.a_bar) CHECK(std::abs(v - 1.0) < 1e-11);
    for (double v : d.b_bar) CHECK(std::abs(v) < 1e-11);
  }
}

TEST_CASE("scan matches the naive recurrence") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t bt = 1 + rng() % 2, len = 1 + rng() % 40, n = 1 + rng() % 6,
                      k = 1 + rng() % 6;
    Tensor x = random_tensor({bt, len, k}, rng()), delta = random_tensor({bt, len, k}, rng(), 0.01, 2.0),
           a = random_tensor({n, k}, rng(), -2.0, -0.05), b = random_tensor({bt, len, n}, rng()),
           c = random_tensor({bt, len, n}, rng());
    CHECK(max_abs_diff(ops::selective_scan(x, delta, a, b, c).data(),
                       naive_scan(x, delta, a, b, c)) < 1e-12);
  }
  SUBCASE("fixed L=16, N=4, K=3") {
    Tensor x = random_tensor({1, 16, 3}, 1), delta = random_tensor({1, 16, 3}, 2, 0.01, 1.0),
           a = random_tensor({4, 3}, 3, -1.0, -0.1), b = random_tensor({1, 16, 4}, 4),
           c = random_tensor({1, 16, 4}, 5);
    CHECK(max_abs_diff(ops::selective_scan(x, delta, a, b, c).data(),
                       naive_scan(x, delta, a, b, c)) < 1e-12);
  }
}

TEST_CASE("scan with a large step forgets its past") {
  Tensor x = random_tensor({1, 10, 3}, 6), delta(Shape{1, 10, 3}, 50.0),
         a = random_tensor({2, 3}, 7, -1.0, -0.5), b = random_tensor({1, 10, 2}, 8),
         c = random_tensor({1, 10, 2}, 9);
  CHECK(max_abs_diff(ops::selective_scan(x, delta, a, b, c).data(),
                     naive_scan(x, delta, a, b, c, true)) < 1e-9);
}

TEST_CASE("scan with a near-zero decay rate integrates") {
  Tensor x = random_tensor({1, 8, 1}, 10), delta(Shape{1, 8, 1}, 1.0), a(Shape{1, 1}, -1e-9),
         b(Shape{1, 8, 1}, 1.0), c(Shape{1, 8, 1}, 1.0);
  Tensor y = ops::selective_scan(x, delta, a, b, c);
  double run = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    run += x.data()[i];
    CHECK(std::abs(y.data()[i] - run) < 1e-6);
  }
}

TEST_CASE("mamba layer") {
  nn::Rng rng(1);
  ssm::MambaLayer layer(ssm::MambaConfig{}, rng);
  SUBCASE("default size has 65,024 parameters") { CHECK(layer.parameter_count() == 65024); }
  SUBCASE("zero input and zero biases give zero output") {
    for (double& v : layer.conv_bias.data()) v = 0.0;
    Tensor y = layer.forward(Tensor(Shape{2, 9, 64}, 0.0));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("shape contract") {
    for (std::size_t len : {1u, 7u, 50u}) {
      Tensor y = layer.forward(random_tensor({2, len, 64}, len));
      CHECK(y.shape() == Shape{2, len, 64});
      CHECK(testing::all_finite(y.data()));
    }
  }
  SUBCASE("causal: a change at step j leaves earlier outputs untouched") {
    Tensor x = random_tensor({1, 12, 64}, 3);
    Tensor y0 = layer.forward(x);
    x.data()[7 * 64 + 5] += 1.0;
    Tensor y1 = layer.forward(x);
    CHECK(testing::bit_identical(y0.data().subspan(0, 7 * 64), y1.data().subspan(0, 7 * 64)));
  }
}

TEST_CASE("mamba layer gradients") {
  nn::Rng rng(2);
  ssm::MambaLayer layer(small_config(), rng);
  for (double& v : layer.conv_bias.data()) v = 0.1;
  Tensor x = random_tensor({2, 6, 4}, 11);
  std::vector<Tensor> params;
  for (auto& p : layer.parameters()) params.push_back(p.tensor);
  params.push_back(x);
  auto rep = grad_check_params([&] { return ops::sum(layer.forward(x)); }, params);
  CHECK(rep.failure.empty());
  CHECK(rep.max_relative_error < 1e-4);
  Tensor w = random_tensor({2, 6, 4}, 12);
  auto rep2 = grad_check_params([&] { return ops::sum(ops::mul(layer.forward(x), w)); }, params);
  CHECK(rep2.max_relative_error < 1e-4);
}

TEST_CASE("bidirectional mamba") {
  nn::Rng rng(4);
  const auto cfg = small_config();
  auto shared = std::make_shared<ssm::MambaLayer>(cfg, rng);

  SUBCASE("shared directions and a symmetric merge are flip-symmetric on constant input") {
    nn::Linear merge(8, 4, true, rng);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        merge.weight.data()[(r + 4) * 4 + c] = merge.weight.data()[r * 4 + c];
    ssm::BiMamba bi(shared, shared, merge);
    Tensor x(Shape{1, 11, 4}, 0.7);
    Tensor y = bi.forward(x);
    CHECK(max_abs_diff(y.data(), ops::flip(y, 1).data()) < 1e-10);
  }
  SUBCASE("length one") {
    ssm::BiMamba bi(cfg, rng);
    Tensor x = random_tensor({3, 1, 4}, 5);
    Tensor expect = bi.merge.forward(
        ops::concat({bi.forward_layer->forward(x), bi.backward_layer->forward(x)}, 2));
    CHECK(testing::bit_identical(bi.forward(x).data(), expect.data()));
  }
  SUBCASE("matches the explicit composition") {
    ssm::BiMamba bi(cfg, rng);
    Tensor x = random_tensor({2, 9, 4}, 6);
    Tensor f = bi.forward_layer->forward(x);
    Tensor b = ops::flip(bi.backward_layer->forward(ops::flip(x, 1)), 1);
    Tensor expect = bi.merge.forward(ops::concat({f, b}, 2));
    CHECK(testing::bit_identical(bi.forward(x).data(), expect.data()));
  }
  SUBCASE("separate directions by default") {
    ssm::BiMamba bi(cfg, rng);
    CHECK(bi.forward_layer != bi.backward_layer);
    CHECK_FALSE(bi.forward_layer->in_proj.same_storage(bi.backward_layer->in_proj));
  }
}
