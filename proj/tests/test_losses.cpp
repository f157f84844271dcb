// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "mambattn/dsp.hpp"
#include "mambattn/error.hpp"
#include "mambattn/grad_check.hpp"
#include "mambattn/losses.hpp"
#include "mambattn/ops.hpp"
#include "test_util.hpp"

using namespace mambattn;
using testing::random_tensor;

namespace {

double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

Tensor plus_constant(const Tensor& x, double c) { return ops::add_scalar(x, c); }

}  // namespace

TEST_CASE("time loss") {
  Tensor x = random_tensor({2, 50}, 1);
  CHECK(losses::loss_time(x, x).item() == 0.0);
  CHECK(losses::loss_time(Tensor(Shape{1, 10}, 0.0), Tensor(Shape{1, 10}, 0.5)).item() == 0.5);
  Tensor y = random_tensor({2, 50}, 2);
  double ref = 0.0;
  for (std::size_t i = 0; i < 100; ++i) ref += std::abs(x.data()[i] - y.data()[i]) / 100.0;
  CHECK(std::abs(losses::loss_time(x, y).item() - ref) < 1e-12);
  CHECK_THROWS_AS(losses::loss_time(x, random_tensor({2, 49}, 3)), ShapeError);
}

TEST_CASE("magnitude and complex losses") {
  Tensor m = random_tensor({2, 4, 5}, 4, 0.1, 1.0), p = random_tensor({2, 4, 5}, 5, -3, 3);
  Tensor re = ops::mul(m, ops::cos(p)), im = ops::mul(m, ops::sin(p));
  CHECK(losses::loss_mag(m, m).item() == 0.0);
  CHECK(losses::loss_complex(re, im, re, im).item() == 0.0);
  SUBCASE("phase-only error separates the two") {
    Tensor p2 = plus_constant(p, 0.7);
    Tensor re2 = ops::mul(m, ops::cos(p2)), im2 = ops::mul(m, ops::sin(p2));
    CHECK(losses::loss_mag(m, m).item() == 0.0);
    CHECK(losses::loss_complex(re, im, re2, im2).item() > 0.0);
  }
  SUBCASE("direct formulas") {
    Tensor m2 = random_tensor({2, 4, 5}, 6), re2 = random_tensor({2, 4, 5}, 7),
           im2 = random_tensor({2, 4, 5}, 8);
    CHECK(std::abs(losses::loss_mag(m, m2).item() - mse(m.data(), m2.data())) < 1e-12);
    CHECK(std::abs(losses::loss_complex(re, im, re2, im2).item() -
                   (mse(re.data(), re2.data()) + mse(im.data(), im2.data()))) < 1e-12);
  }
}

TEST_CASE("phase loss") {
  Tensor p = random_tensor({2, 5, 6}, 9, -3, 3);
  auto same = losses::loss_phase_terms(p, p);
  CHECK(same.total.item() == 0.0);
  auto wrapped = losses::loss_phase_terms(p, plus_constant(p, 2.0 * std::numbers::pi));
  CHECK(wrapped.instantaneous.item() < 1e-12);
  CHECK(wrapped.total.item() < 1e-12);
  auto half = losses::loss_phase_terms(p, plus_constant(p, std::numbers::pi));
  CHECK(half.instantaneous.item() == doctest::Approx(std::numbers::pi).epsilon(1e-12));
  CHECK(half.group_delay.item() < 1e-12);
  CHECK(half.frequency.item() < 1e-12);
  CHECK(half.total.item() ==
        doctest::Approx(half.instantaneous.item() + half.group_delay.item() + half.frequency.item()));
}

TEST_CASE("consistency loss") {
  dsp::StftOperator op;
  auto x = testing::uniform(800, 10);
  auto [re, im] = op.forward(Tensor(Shape{1, 800}, x));
  SUBCASE("a real waveform's spectrum is consistent") {
    CHECK(losses::loss_consistency(re, im, op).item() < 1e-10);
  }
  SUBCASE("a perturbed spectrum is not") {
    Tensor re2 = ops::add(re, random_tensor(re.shape(), 11, -0.1, 0.1));
    const double v = losses::loss_consistency(re2, im, op).item();
    CHECK(v > 0.0);
    // Recompute through the reference istft/stft.
    dsp::Spectrogram s;
    s.frames = re.dim(1);
    s.bins = re.dim(2);
    s.magnitude.resize(re.numel());
    s.phase.resize(re.numel());
    dsp::polar(re2.data(), im.data(), s.magnitude, s.phase);
    auto round = dsp::stft(dsp::istft(s, 800));
    std::vector<double> r(re.numel()), i(re.numel());
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto z = std::polar(round.magnitude[k], round.phase[k]);
      r[k] = z.real();
      i[k] = z.imag();
    }
    CHECK(std::abs(v - (mse(re2.data(), r) + mse(im.data(), i))) < 1e-10);
  }
  SUBCASE("compressed form is zero at the consistent point too") {
    auto [rc, ic] = losses::compress_spectrum(re, im, 0.3);
    CHECK(losses::loss_consistency_compressed(rc, ic, Tensor(Shape{1, 800}, x), op, 0.3).item() <
          1e-20);
  }
}

TEST_CASE("compress_spectrum scales magnitude to a power") {
  Tensor re(Shape{2}, std::vector<double>{3.0, 0.0}), im(Shape{2}, std::vector<double>{4.0, 0.0});
  auto [rc, ic] = losses::compress_spectrum(re, im, 0.3, 0.0);
  CHECK(std::hypot(rc.data()[0], ic.data()[0]) == doctest::Approx(std::pow(5.0, 0.3)).epsilon(1e-14));
  CHECK(std::atan2(ic.data()[0], rc.data()[0]) == doctest::Approx(std::atan2(4.0, 3.0)));
}

TEST_CASE("adversarial losses") {
  CHECK(losses::loss_adversarial_generator(Tensor(Shape{3}, 1.0)).item() == 0.0);
  Tensor d(Shape{2}, std::vector<double>{0.3, 0.8});
  const std::vector<double> q{1.0, 1.0};
  const double expect = (2 * 0.7 * 0.7 + 2 * 0.2 * 0.2) / 2.0;
  CHECK(losses::loss_discriminator(d, d, q).item() == doctest::Approx(expect).epsilon(1e-15));
  CHECK_THROWS_AS(losses::loss_discriminator(d, d, std::vector<double>{1.5, 0.0}), ShapeError);
  CHECK(losses::quality_from_si_sdr(10.0) == 0.5);
}

TEST_CASE("discriminator") {
  nn::Rng rng(1);
  losses::Discriminator disc(rng);
  Tensor clean = random_tensor({2, 12, 33}, 12, 0.0, 1.0), est = random_tensor({2, 12, 33}, 13, 0.0, 1.0);
  SUBCASE("outputs lie in [0, 1]") {
    Tensor y = disc.forward(clean, est);
    CHECK(y.shape() == Shape{2});
    for (double v : y.data()) CHECK((v >= 0.0 && v <= 1.0));
  }
  SUBCASE("one gradient step lowers its loss") {
    const std::vector<double> q{0.2, 0.6};
    auto loss = [&] { return losses::loss_discriminator(disc.forward(clean, clean), disc.forward(clean, est), q); };
    double before = 0.0;
    {
      autograd::GradScope scope;
      Tensor l = loss();
      before = l.item();
      autograd::backward(l);
    }
    for (auto& p : disc.parameters()) {
      auto g = p.tensor.grad();
      for (std::size_t i = 0; i < g.size(); ++i) p.tensor.data()[i] -= 1e-3 * g[i];
    }
    autograd::NoGrad off;
    CHECK(loss().item() < before);
  }
  SUBCASE("gradient check") {
    auto params = disc.parameters();
    std::vector<Tensor> ps{est};
    for (auto& p : params) ps.push_back(p.tensor);
    const std::vector<double> q{0.3, 0.9};
    auto rep = grad_check_params(
        [&] { return losses::loss_discriminator(disc.forward(clean, clean), disc.forward(clean, est), q); },
        ps, {.max_coordinates = 400, .seed = 3});
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("every loss term passes a finite-difference check") {
  dsp::StftOperator op(dsp::StftConfig{64, 64, 16});
  Tensor a = random_tensor({2, 4, 5}, 20), b = random_tensor({2, 4, 5}, 21);
  Tensor ph = random_tensor({2, 4, 5}, 22, -3, 3), ph2 = random_tensor({2, 4, 5}, 23, -3, 3);
  Tensor re = random_tensor({1, 5, 33}, 24), im = random_tensor({1, 5, 33}, 25);
  Tensor wave = random_tensor({1, 64}, 26);
  auto check = [](const char* name, const std::function<Tensor()>& f, std::vector<Tensor> ps) {
    CAPTURE(name);
    auto rep = grad_check_params(f, ps);
    CHECK(rep.failure.empty());
    CHECK(rep.max_relative_error < 1e-4);
  };
  check("time", [&] { return losses::loss_time(a, b); }, {b});
  check("magnitude", [&] { return losses::loss_mag(a, b); }, {b});
  check("complex", [&] { return losses::loss_complex(a, b, ph, ph2); }, {ph, ph2});
  check("phase", [&] { return losses::loss_phase(ph, ph2); }, {ph2});
  check("consistency", [&] { return losses::loss_consistency(re, im, op); }, {re, im});
  check("consistency_compressed", [&] {
    auto [rc, ic] = losses::compress_spectrum(re, im, 0.3);
    return losses::loss_consistency_compressed(rc, ic, wave, op, 0.3);
  }, {re, im, wave});
  Tensor d = random_tensor({3}, 27, 0.1, 0.9), d2 = random_tensor({3}, 28, 0.1, 0.9);
  check("adversarial", [&] { return losses::loss_adversarial_generator(d); }, {d});
  const std::vector<double> q{0.1, 0.5, 1.0};
  check("discriminator", [&] { return losses::loss_discriminator(d, d2, q); }, {d, d2});
}

TEST_CASE("weighted total") {
  auto terms = [](double v) {
    losses::GeneratorTerms t;
    for (Tensor* x : {&t.time, &t.magnitude, &t.complex, &t.phase, &t.consistency, &t.adversarial})
      *x = Tensor::scalar(v);
    return t;
  };
  losses::LossWeights w;
  CHECK(losses::generator_total(terms(0.0), w).item() == 0.0);
  CHECK(losses::generator_total(terms(1.0), w).item() == doctest::Approx(1.65).epsilon(1e-15));
  losses::GeneratorTerms t = terms(1.0);
  t.time = Tensor::scalar(0.37);
  t.phase = Tensor::scalar(2.5);
  const double one = losses::generator_total(t, w).item();
  for (Tensor* x : {&t.time, &t.magnitude, &t.complex, &t.phase, &t.consistency, &t.adversarial})
    *x = Tensor::scalar(2.0 * x->item());
  CHECK(losses::generator_total(t, w).item() == doctest::Approx(2.0 * one).epsilon(1e-15));
  w.phase = -1.0;
  CHECK_THROWS(w.validate());
}
