// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/losses.hpp"

#include <cmath>
#include <string>

#include "mambattn/error.hpp"

namespace mambattn::losses {
namespace {

void same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes differ, " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  }
}

Tensor mse(const Tensor& a, const Tensor& b) {
  return ops::mean(ops::square(ops::sub(a, b)));
}

Tensor diff(const Tensor& x, std::size_t axis) {
  const std::size_t n = x.dim(axis);
  return ops::sub(ops::slice(x, axis, 1, n), ops::slice(x, axis, 0, n - 1));
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {time, magnitude, complex, phase, consistency, adversarial}) {
    if (!(w >= 0.0)) throw ShapeError("loss weights must be nonnegative");
  }
}

Tensor loss_time(const Tensor& clean, const Tensor& estimate) {
  same_shape("loss_time", clean, estimate);
  return ops::mean(ops::abs(ops::sub(clean, estimate)));
}

Tensor loss_mag(const Tensor& clean, const Tensor& estimate) {
  same_shape("loss_mag", clean, estimate);
  return mse(clean, estimate);
}

Tensor loss_complex(const Tensor& clean_real, const Tensor& clean_imag,
                    const Tensor& est_real, const Tensor& est_imag) {
  same_shape("loss_complex", clean_real, est_real);
  same_shape("loss_complex", clean_imag, est_imag);
  return ops::add(mse(clean_real, est_real), mse(clean_imag, est_imag));
}

PhaseTerms loss_phase_terms(const Tensor& clean, const Tensor& estimate) {
  same_shape("loss_phase", clean, estimate);
  if (clean.rank() < 2 || clean.dim(clean.rank() - 1) < 2 ||
      clean.dim(clean.rank() - 2) < 2) {
    throw ShapeError("loss_phase: need at least 2 frames and 2 bins, got " +
                     to_string(clean.shape()));
  }
  const std::size_t f_axis = clean.rank() - 1, t_axis = clean.rank() - 2;
  PhaseTerms t;
  t.instantaneous = ops::mean(ops::anti_wrap(ops::sub(clean, estimate)));
  t.group_delay =
      ops::mean(ops::anti_wrap(ops::sub(diff(clean, f_axis), diff(estimate, f_axis))));
  t.frequency =
      ops::mean(ops::anti_wrap(ops::sub(diff(clean, t_axis), diff(estimate, t_axis))));
  t.total = ops::add(ops::add(t.instantaneous, t.group_delay), t.frequency);
  return t;
}

Tensor loss_phase(const Tensor& clean, const Tensor& estimate) {
  return loss_phase_terms(clean, estimate).total;
}

Tensor loss_consistency(const Tensor& real, const Tensor& imag,
                        const dsp::StftOperator& stft, std::size_t length) {
  same_shape("loss_consistency", real, imag);
  if (real.rank() != 3) {
    throw ShapeError("loss_consistency: spectra must be M x T x F, got " +
                     to_string(real.shape()));
  }
  if (length == 0) length = (real.dim(1) - 1) * stft.config().hop;
  Tensor wave = stft.inverse(real, imag, length);
  auto [re2, im2] = stft.forward(wave);
  return ops::add(mse(real, re2), mse(imag, im2));
}

std::pair<Tensor, Tensor> compress_spectrum(const Tensor& real, const Tensor& imag,
                                            double c, double eps) {
  same_shape("compress_spectrum", real, imag);
  Tensor power2 = ops::add_scalar(ops::add(ops::square(real), ops::square(imag)), eps);
  Tensor factor = ops::power(power2, 0.5 * (c - 1.0));
  return {ops::mul(real, factor), ops::mul(imag, factor)};
}

Tensor loss_consistency_compressed(const Tensor& real_c, const Tensor& imag_c,
                                   const Tensor& waveform, const dsp::StftOperator& stft,
                                   double c) {
  same_shape("loss_consistency", real_c, imag_c);
  auto [re, im] = stft.forward(waveform);
  if (re.shape() != real_c.shape()) {
    throw ShapeError("loss_consistency: waveform STFT " + to_string(re.shape()) +
                     " does not match spectrum " + to_string(real_c.shape()));
  }
  auto [re_c, im_c] = compress_spectrum(re, im, c);
  return ops::add(mse(real_c, re_c), mse(imag_c, im_c));
}

Discriminator::Discriminator(nn::Rng& rng, std::size_t base_channels) {
  ops::Conv2dOptions o;
  o.stride = {2, 2};
  o.padding = {1, 1, 1, 1};
  std::size_t in = 2, out = base_channels;
  for (int i = 0; i < 3; ++i) {
    blocks.emplace_back(in, out, 3, 3, o, false, rng);
    in = out;
    out *= 2;
  }
  head = nn::Conv2d(in, 1, 3, 3, o, rng);
}

Tensor Discriminator::forward(const Tensor& reference, const Tensor& estimate) const {
  same_shape("discriminator", reference, estimate);
  if (reference.rank() != 3) {
    throw ShapeError("discriminator: inputs must be M x T x F, got " +
                     to_string(reference.shape()));
  }
  const std::size_t m = reference.dim(0), t = reference.dim(1), f = reference.dim(2);
  Tensor x = ops::concat(
      {ops::reshape(reference, {m, 1, t, f}), ops::reshape(estimate, {m, 1, t, f})}, 1);
  for (const auto& b : blocks) x = b.forward(x);
  x = head.forward(x);
  return ops::sigmoid(ops::mean(x, {1, 2, 3}));
}

void Discriminator::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].visit(nn::join(prefix, "blocks." + std::to_string(i)), fn);
  }
  head.visit(nn::join(prefix, "head"), fn);
}

Tensor loss_discriminator(const Tensor& d_clean, const Tensor& d_estimate,
                          std::span<const double> quality) {
  same_shape("loss_discriminator", d_clean, d_estimate);
  if (quality.size() != d_estimate.numel()) {
    throw ShapeError("loss_discriminator: " + std::to_string(quality.size()) +
                     " quality targets for " + std::to_string(d_estimate.numel()) +
                     " outputs");
  }
  for (double q : quality) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw ShapeError("loss_discriminator: quality target " + std::to_string(q) +
                       " outside [0, 1]");
    }
  }
  Tensor target(d_estimate.shape(), std::vector<double>(quality.begin(), quality.end()));
  Tensor real_term = ops::square(ops::add_scalar(d_clean, -1.0));
  Tensor fake_term = ops::square(ops::sub(d_estimate, target));
  return ops::mean(ops::add(real_term, fake_term));
}

Tensor loss_adversarial_generator(const Tensor& d_estimate) {
  return ops::mean(ops::square(ops::add_scalar(d_estimate, -1.0)));
}

double quality_from_si_sdr(double si_sdr_db) {
  return 1.0 / (1.0 + std::exp(-(si_sdr_db - 10.0) / 5.0));
}

Tensor generator_total(const GeneratorTerms& t, const LossWeights& w) {
  w.validate();
  Tensor total = ops::scale(t.time, w.time);
  total = ops::add(total, ops::scale(t.magnitude, w.magnitude));
  total = ops::add(total, ops::scale(t.complex, w.complex));
  total = ops::add(total, ops::scale(t.phase, w.phase));
  total = ops::add(total, ops::scale(t.consistency, w.consistency));
  return ops::add(total, ops::scale(t.adversarial, w.adversarial));
}

}  // namespace mambattn::losses
