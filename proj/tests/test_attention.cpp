// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>

#include "mambattn/attention.hpp"
#include "mambattn/error.hpp"
#include "mambattn/grad_check.hpp"
#include "mambattn/ops.hpp"
#include "mambattn/optim.hpp"
#include "test_util.hpp"

using namespace mambattn;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

void set_identity(Tensor& w) {
  const std::size_t d = w.dim(0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) w.data()[i * d + j] = i == j ? 1.0 : 0.0;
}

void randomize_biases(attention::MhaWeights& w, std::uint64_t seed) {
  for (Tensor* b : {&w.b_q, &w.b_k, &w.b_v, &w.b_o}) {
    auto v = testing::uniform(b->numel(), seed++);
    std::copy(v.begin(), v.end(), b->data().begin());
  }
}

// Columns [c0, c0 + n) of a 2-D tensor, or entries [c0, c0 + n) of a vector.
Tensor columns(const Tensor& w, std::size_t c0, std::size_t n) {
  return ops::slice(w, w.rank() - 1, c0, c0 + n);
}

Tensor weighted_loss(const Tensor& x, const attention::MhaWeights& w, const Tensor& r) {
  return ops::sum(ops::mul(attention::multi_head_attention(x, w), r));
}

}  // namespace

TEST_CASE("attention over a single position returns V") {
  Tensor q = random_tensor({2, 1, 4}, 1), k = random_tensor({2, 1, 4}, 2),
         v = random_tensor({2, 1, 4}, 3);
  CHECK(testing::bit_identical(attention::scaled_dot_product_attention(q, k, v).data(), v.data()));
}

TEST_CASE("zero queries average V") {
  Tensor q(Shape{6, 4}, 0.0), k = random_tensor({6, 4}, 4), v = random_tensor({6, 3}, 5);
  Tensor y = attention::scaled_dot_product_attention(q, k, v);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 6; ++i) mean += v.data()[i * 3 + j] / 6.0;
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(y.data()[i * 3 + j] - mean) < 1e-15);
  }
}

TEST_CASE("attention matches a two-loop oracle") {
  const std::size_t len = 5, d = 4;
  Tensor q = random_tensor({len, d}, 6), k = random_tensor({len, d}, 7), v = random_tensor({len, d}, 8);
  Tensor y = attention::scaled_dot_product_attention(q, k, v);
  std::vector<double> ref(len * d, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> s(len);
    double peak = -INFINITY, total = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += q.data()[i * d + c] * k.data()[j * d + c];
      s[j] = dot / std::sqrt(double(d));
      peak = std::max(peak, s[j]);
    }
    for (double& e : s) total += (e = std::exp(e - peak));
    for (std::size_t j = 0; j < len; ++j)
      for (std::size_t c = 0; c < d; ++c) ref[i * d + c] += s[j] / total * v.data()[j * d + c];
  }
  CHECK(max_abs_diff(y.data(), ref) < 1e-12);
}

TEST_CASE("one head with identity projections is plain attention") {
  nn::Rng rng(1);
  attention::MhaWeights w(4, 1, false, rng);
  for (Tensor* m : {&w.w_q, &w.w_k, &w.w_v, &w.w_o}) set_identity(*m);
  Tensor x = random_tensor({2, 6, 4}, 9);
  CHECK(testing::bit_identical(attention::multi_head_attention(x, w).data(),
                               attention::scaled_dot_product_attention(x, x, x).data()));
}

TEST_CASE("permuting positions permutes the output") {
  nn::Rng rng(2);
  attention::MhaWeights w(8, 2, true, rng);
  randomize_biases(w, 10);
  Tensor x = random_tensor({1, 7, 8}, 11);
  const std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  Tensor xp(Shape{1, 7, 8});
  for (std::size_t i = 0; i < 7; ++i)
    std::copy_n(x.data().begin() + perm[i] * 8, 8, xp.data().begin() + i * 8);
  Tensor y = attention::multi_head_attention(x, w), yp = attention::multi_head_attention(xp, w);
  double worst = 0.0;
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t c = 0; c < 8; ++c)
      worst = std::max(worst, std::abs(yp.data()[i * 8 + c] - y.data()[perm[i] * 8 + c]));
  CHECK(worst < 1e-12);
}

TEST_CASE("two heads match a per-head loop over sliced projections") {
  nn::Rng rng(3);
  attention::MhaWeights w(8, 2, true, rng);
  randomize_biases(w, 20);
  Tensor x = random_tensor({1, 5, 8}, 12);
  Tensor x2 = ops::reshape(x, {5, 8});
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < 2; ++h) {
    auto proj = [&](const Tensor& wm, const Tensor& b) {
      return ops::add(ops::matmul(x2, columns(wm, h * 4, 4)), columns(b, h * 4, 4));
    };
    heads.push_back(attention::scaled_dot_product_attention(proj(w.w_q, w.b_q), proj(w.w_k, w.b_k),
                                                            proj(w.w_v, w.b_v)));
  }
  Tensor expect = ops::add(ops::matmul(ops::concat(heads, 1), w.w_o), w.b_o);
  CHECK(testing::bit_identical(attention::multi_head_attention(x, w).data(), expect.data()));
}

TEST_CASE("blocked inference path agrees with the recorded path") {
  nn::Rng rng(4);
  attention::MhaWeights w(16, 4, true, rng);
  randomize_biases(w, 30);
  Tensor x = random_tensor({2, 10, 16}, 13);
  Tensor a = attention::multi_head_attention(x, w);
  for (std::size_t block : {1u, 3u, 10u, 64u})
    CHECK(max_abs_diff(a.data(), attention::multi_head_attention_inference(x, w, block).data()) <
          1e-12);
}

TEST_CASE("mha rejects bad shapes") {
  nn::Rng rng(5);
  CHECK_THROWS_AS(attention::MhaWeights(10, 3, true, rng), ShapeError);
  attention::MhaWeights w(8, 2, true, rng);
  CHECK_THROWS_AS(attention::multi_head_attention(random_tensor({1, 3, 6}, 1), w), ShapeError);
}

TEST_CASE("mha gradients") {
  nn::Rng rng(6);
  attention::MhaWeights w(8, 2, true, rng);
  randomize_biases(w, 40);
  Tensor x = random_tensor({2, 4, 8}, 14), r = random_tensor({2, 4, 8}, 15);
  std::vector<Tensor> params{x};
  for (auto& p : w.parameters()) params.push_back(p.tensor);
  auto rep = grad_check_params([&] { return weighted_loss(x, w, r); }, params);
  CHECK(rep.failure.empty());
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("shared pair") {
  nn::Rng rng(7);
  auto pair = attention::make_shared_pair(8, 2, true, rng);
  REQUIRE(pair.shared());
  Tensor x1 = random_tensor({1, 5, 8}, 16), x2 = random_tensor({3, 4, 8}, 17);
  Tensor r1 = random_tensor({1, 5, 8}, 18), r2 = random_tensor({3, 4, 8}, 19);

  SUBCASE("gradient is the sum of per-site gradients") {
    auto shared_params = pair.time->parameters();
    {
      autograd::GradScope scope;
      autograd::backward(
          ops::add(weighted_loss(x1, *pair.time, r1), weighted_loss(x2, *pair.freq, r2)));
    }
    // Same weights, sharing broken by deep copies.
    attention::MhaWeights a = *pair.time, b = *pair.time;
    for (auto* m : {&a, &b})
      m->visit("", [](const std::string&, Tensor& t) {
        t = t.clone();
        t.set_requires_grad(true);
      });
    {
      autograd::GradScope scope;
      autograd::backward(ops::add(weighted_loss(x1, a, r1), weighted_loss(x2, b, r2)));
    }
    auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < shared_params.size(); ++i) {
      CAPTURE(shared_params[i].name);
      std::vector<double> sum(pa[i].tensor.numel());
      for (std::size_t j = 0; j < sum.size(); ++j)
        sum[j] = pa[i].tensor.grad()[j] + pb[i].tensor.grad()[j];
      CHECK(max_abs_diff(shared_params[i].tensor.grad(), sum) < 1e-12);
    }
  }
  SUBCASE("both sites see the same values after a step") {
    optim::AdamW opt(pair.time->parameters(), {});
    {
      autograd::GradScope scope;
      autograd::backward(
          ops::add(weighted_loss(x1, *pair.time, r1), weighted_loss(x2, *pair.freq, r2)));
    }
    const std::vector<double> before(pair.time->w_q.data().begin(), pair.time->w_q.data().end());
    opt.step();
    CHECK_FALSE(testing::bit_identical(before, pair.time->w_q.data()));
    CHECK(testing::bit_identical(pair.time->w_q.data(), pair.freq->w_q.data()));
    CHECK(testing::bit_identical(pair.time->w_o.data(), pair.freq->w_o.data()));
  }
}

TEST_CASE("unshared pair starts equal and diverges") {
  nn::Rng rng(8);
  auto pair = attention::make_unshared_pair(8, 2, true, rng);
  REQUIRE_FALSE(pair.shared());
  CHECK_FALSE(pair.time->w_q.same_storage(pair.freq->w_q));
  CHECK(testing::bit_identical(pair.time->w_q.data(), pair.freq->w_q.data()));
  Tensor x1 = random_tensor({1, 5, 8}, 20), x2 = random_tensor({1, 5, 8}, 21, -3, 3);
  Tensor r = random_tensor({1, 5, 8}, 22);
  auto params = pair.time->parameters();
  for (auto& p : pair.freq->parameters()) params.push_back(p);
  optim::AdamW opt(params, {});
  {
    autograd::GradScope scope;
    autograd::backward(ops::add(weighted_loss(x1, *pair.time, r), weighted_loss(x2, *pair.freq, r)));
  }
  opt.step();
  CHECK_FALSE(testing::bit_identical(pair.time->w_q.data(), pair.freq->w_q.data()));
}
