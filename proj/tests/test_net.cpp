// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mambattn/error.hpp"
#include "mambattn/grad_check.hpp"
#include "mambattn/losses.hpp"
#include "mambattn/net.hpp"
#include "mambattn/ops.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

using namespace mambattn;
using testing::random_tensor;
using testing::run_block_oracle;
using testing::tiny_config;

namespace {

constexpr net::Variant kVariants[] = {net::Variant::kShared, net::Variant::kUnshared,
                                      net::Variant::kAttentionAfter, net::Variant::kNoAttention};

}  // namespace

TEST_CASE("encoder") {
  net::ModelConfig cfg;
  nn::Rng rng(1);
  net::Encoder enc(cfg, rng);
  SUBCASE("default shape M x 64 x T x 100") {
    Tensor y = enc.forward(random_tensor({2, 2, 3, 201}, 1));
    CHECK(y.shape() == Shape{2, 64, 3, 100});
  }
  SUBCASE("zero input with zero biases stays zero") {
    testing::zero_biases(enc);
    Tensor y = enc.forward(Tensor(Shape{1, 2, 3, 201}, 0.0));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("same size in every variant") {
    for (auto v : kVariants) {
      cfg.variant = v;
      CHECK(net::parameter_breakdown(cfg).encoder == enc.parameter_count());
    }
  }
  SUBCASE("rejects a wrong channel count") {
    CHECK_THROWS_AS(enc.forward(random_tensor({1, 3, 3, 201}, 2)), ShapeError);
  }
}

TEST_CASE("mambattention block") {
  auto cfg = tiny_config();
  Tensor x = random_tensor({2, 4, 5, 6}, 3);
  SUBCASE("residual shape contract") {
    for (auto v : kVariants) {
      cfg.variant = v;
      nn::Rng rng(2);
      net::MambAttentionBlock b(cfg, rng);
      for (const Shape& s : {Shape{1, 4, 1, 1}, Shape{2, 4, 5, 6}, Shape{1, 4, 9, 2}})
        CHECK(b.forward(random_tensor(s, 4)).shape() == s);
    }
  }
  SUBCASE("zero-initialized residual branches give the identity") {
    cfg.zero_init_residual = true;
    for (auto v : kVariants) {
      cfg.variant = v;
      nn::Rng rng(3);
      net::MambAttentionBlock b(cfg, rng);
      CHECK(testing::bit_identical(b.forward(x).data(), x.data()));
    }
  }
  SUBCASE("attention first for shared") {
    nn::Rng rng(4);
    net::MambAttentionBlock b(cfg, rng);
    CHECK(testing::bit_identical(b.forward(x).data(), run_block_oracle(b, x, true, true).data()));
  }
  SUBCASE("attention_after reorders the residual steps") {
    cfg.variant = net::Variant::kAttentionAfter;
    nn::Rng rng(5);
    net::MambAttentionBlock b(cfg, rng);
    CHECK(testing::bit_identical(b.forward(x).data(), run_block_oracle(b, x, false, true).data()));
  }
  SUBCASE("no_attention is a plain bidirectional Mamba dual-path block") {
    cfg.variant = net::Variant::kNoAttention;
    nn::Rng rng(6);
    net::MambAttentionBlock b(cfg, rng);
    CHECK(testing::bit_identical(b.forward(x).data(), run_block_oracle(b, x, false, false).data()));
    bool any_attention = false;
    b.visit("", [&](const std::string& name, Tensor&) {
      any_attention |= name.find("mha") != std::string::npos || name.find("norm") != std::string::npos;
    });
    CHECK_FALSE(any_attention);
  }
  SUBCASE("gradients through a full block") {
    nn::Rng rng(7);
    net::MambAttentionBlock b(cfg, rng);
    Tensor r = random_tensor(x.shape(), 8);
    std::vector<Tensor> params{x};
    for (auto& p : b.parameters()) params.push_back(p.tensor);
    auto rep = grad_check_params([&] { return ops::sum(ops::mul(b.forward(x), r)); }, params);
    CHECK(rep.failure.empty());
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("shared and unshared models agree before training") {
  Tensor wave = random_tensor({1, 160}, 9);
  net::Model a(tiny_config(net::Variant::kShared), 11), b(tiny_config(net::Variant::kUnshared), 11);
  auto oa = a.forward(wave), ob = b.forward(wave);
  CHECK(testing::bit_identical(oa.waveform.data(), ob.waveform.data()));
  CHECK(testing::bit_identical(oa.mask.data(), ob.mask.data()));
}

TEST_CASE("mask decoder") {
  net::ModelConfig cfg;
  cfg.channels = 8;
  cfg.heads = 2;
  nn::Rng rng(10);
  net::MaskDecoder dec(cfg, rng);
  Tensor latent = random_tensor({1, 8, 3, 100}, 12, -3, 3);
  SUBCASE("restores 201 bins and stays inside (0, beta)") {
    Tensor m = dec.forward(latent);
    CHECK(m.shape() == Shape{1, 3, 201});
    for (double v : m.data()) CHECK((v > 0.0 && v < 2.0));
  }
  SUBCASE("a zero pre-activation gives the identity mask") {
    for (double& v : dec.project.weight.data()) v = 0.0;
    for (double& v : dec.project.bias.data()) v = 0.0;
    Tensor m = dec.forward(latent);
    for (double v : m.data()) CHECK(v == 1.0);
    Tensor ym = random_tensor({1, 3, 201}, 13, 0.0, 2.0);
    CHECK(testing::bit_identical(ops::mul(ym, m).data(), ym.data()));
  }
}

TEST_CASE("phase decoder") {
  auto cfg = tiny_config();
  nn::Rng rng(14);
  net::PhaseDecoder dec(cfg, rng);
  Tensor latent = random_tensor({2, 4, 3, 5}, 15, -2, 2);
  SUBCASE("range") {
    Tensor p = dec.forward(latent);
    CHECK(p.shape() == Shape{2, 3, 11});
    for (double v : p.data()) CHECK((v > -std::numbers::pi && v <= std::numbers::pi));
  }
  SUBCASE("positive real part with zero imaginary part gives zero phase") {
    for (double& v : dec.imag.weight.data()) v = 0.0;
    for (double& v : dec.imag.bias.data()) v = 0.0;
    for (double& v : dec.real.weight.data()) v = 0.0;
    for (double& v : dec.real.bias.data()) v = 1.0;
    Tensor p = dec.forward(latent);
    for (double v : p.data()) CHECK(v == 0.0);
  }
  SUBCASE("phase-loss gradient reaches both branches") {
    Tensor clean = random_tensor({2, 3, 11}, 16, -3, 3);
    std::vector<Tensor> params{dec.real.weight, dec.real.bias, dec.imag.weight, dec.imag.bias};
    auto rep = grad_check_params([&] { return losses::loss_phase(clean, dec.forward(latent)); }, params);
    CHECK(rep.failure.empty());
    CHECK(rep.max_relative_error < 1e-4);
    autograd::GradScope scope;
    for (auto& p : params) p.zero_grad();
    autograd::backward(losses::loss_phase(clean, dec.forward(latent)));
    double gr = 0.0, gi = 0.0;
    for (double g : dec.real.weight.grad()) gr += std::abs(g);
    for (double g : dec.imag.weight.grad()) gi += std::abs(g);
    CHECK(gr > 0.0);
    CHECK(gi > 0.0);
  }
}

TEST_CASE("full model") {
  SUBCASE("output length equals input length") {
    net::Model model(tiny_config(), 1);
    for (std::size_t n : {100u, 160u, 257u}) {
      auto out = model.forward(random_tensor({2, n}, n));
      CHECK(out.waveform.shape() == Shape{2, n});
    }
  }
  SUBCASE("untrained K=8, R=1 model is finite on white noise") {
    net::ModelConfig cfg;
    cfg.channels = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    net::Model model(cfg, 2);
    auto out = model.forward(random_tensor({1, 1600}, 3));
    CHECK(testing::all_finite(out.waveform.data()));
    CHECK(testing::all_finite(out.mask.data()));
    CHECK(testing::all_finite(out.phase.data()));
  }
  SUBCASE("end-to-end gradient of the generator loss on a 1% sample") {
    net::Model model(tiny_config(), 4);
    nn::Rng rng(5);
    losses::Discriminator disc(rng, 4);
    Tensor clean = random_tensor({1, 128}, 6, -0.5, 0.5);
    Tensor noisy = ops::add(clean, random_tensor({1, 128}, 7, -0.2, 0.2));
    std::vector<Tensor> params;
    for (auto& p : model.parameters()) params.push_back(p.tensor);
    GradCheckOptions o;
    // A 1e-5 probe of a dense-net weight moves hundreds of PReLU inputs at
    // once and some cross zero, so the difference quotient straddles a kink.
    // With slopes forced to 1 the same check passes at 1e-5.
    o.step = 1e-6;
    o.tolerance = 1e-3;
    o.max_coordinates = (model.parameter_count() + 99) / 100;
    o.seed = 8;
    auto rep = grad_check_params(
        [&] {
          return losses::generator_total(testing::generator_terms(model, disc, clean, noisy), {});
        },
        params, o);
    CHECK(rep.failure.empty());
    CHECK(rep.max_relative_error < 1e-3);
    CHECK(rep.coordinates_checked == o.max_coordinates);
  }
}

TEST_CASE("parameter counts") {
  net::ModelConfig cfg;
  auto count = [&](net::Variant v) {
    cfg.variant = v;
    return static_cast<double>(net::count_parameters(cfg));
  };
  const double shared = count(net::Variant::kShared), unshared = count(net::Variant::kUnshared),
               after = count(net::Variant::kAttentionAfter), none = count(net::Variant::kNoAttention);
  CHECK(std::abs(shared / 2.33e6 - 1.0) <= 0.05);
  CHECK(std::abs(none / 2.25e6 - 1.0) <= 0.05);
  CHECK(std::abs(unshared / 2.39e6 - 1.0) <= 0.05);
  CHECK(after == shared);
  nn::Rng rng(0);
  attention::MhaWeights one(cfg.channels, cfg.heads, cfg.attention_bias, rng);
  CHECK(unshared - shared == static_cast<double>(cfg.layers * one.parameter_count()));
}

TEST_CASE("variant names round trip") {
  for (auto v : kVariants) CHECK(net::parse_variant(net::to_string(v)) == v);
  CHECK_THROWS_AS(net::parse_variant("both"), ShapeError);
}
