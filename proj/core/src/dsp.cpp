// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/dsp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mambattn/error.hpp"
#include "mambattn/ops.hpp"

namespace mambattn::dsp {
namespace {

// Reflection-padded source index for padded position p.
std::size_t reflect(std::ptrdiff_t p, std::ptrdiff_t pad, std::ptrdiff_t length) {
  std::ptrdiff_t src = p - pad;
  if (src < 0) src = -src;
  if (src >= length) src = 2 * (length - 1) - src;
  return static_cast<std::size_t>(src);
}

// Envelope sum_t w^2(p - t*hop) over the padded timeline.
std::vector<double> window_envelope(const StftConfig& cfg, std::size_t frames) {
  const auto w = cfg.window();
  std::vector<double> env((frames - 1) * cfg.hop + cfg.fft_size, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < cfg.fft_size; ++n) env[t * cfg.hop + n] += w[n] * w[n];
  return env;
}

}  // namespace

void StftConfig::validate() const {
  if (fft_size < 2 || window_length == 0 || hop == 0) {
    throw ShapeError("stft config: sizes must be positive (fft_size >= 2)");
  }
  if (hop > window_length) {
    throw ShapeError("stft config: hop " + std::to_string(hop) +
                     " exceeds window_length " + std::to_string(window_length));
  }
  if (window_length > fft_size) {
    throw ShapeError("stft config: window_length " + std::to_string(window_length) +
                     " exceeds fft_size " + std::to_string(fft_size));
  }
}

std::vector<double> StftConfig::window() const {
  std::vector<double> w(fft_size, 0.0);
  const std::size_t offset = (fft_size - window_length) / 2;
  for (std::size_t n = 0; n < window_length; ++n) {
    w[offset + n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                         static_cast<double>(window_length));
  }
  return w;
}

StftOperator::StftOperator(StftConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t n_fft = cfg_.fft_size, bins = cfg_.bins();
  const auto w = cfg_.window();
  window_ = Tensor(Shape{n_fft}, w);
  std::vector<double> ac(n_fft * bins), as(n_fft * bins), sc(bins * n_fft),
      ss(bins * n_fft);
  const double base = 2.0 * std::numbers::pi / static_cast<double>(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n)
    for (std::size_t k = 0; k < bins; ++k) {
      const double angle = base * static_cast<double>((k * n) % n_fft);
      const double c = std::cos(angle), s = std::sin(angle);
      ac[n * bins + k] = w[n] * c;
      as[n * bins + k] = -w[n] * s;
      const bool edge = k == 0 || (n_fft % 2 == 0 && k == n_fft / 2);
      const double weight = (edge ? 1.0 : 2.0) / static_cast<double>(n_fft);
      sc[k * n_fft + n] = weight * c * w[n];
      ss[k * n_fft + n] = -weight * s * w[n];
    }
  analysis_cos_ = Tensor(Shape{n_fft, bins}, std::move(ac));
  analysis_sin_ = Tensor(Shape{n_fft, bins}, std::move(as));
  synthesis_cos_ = Tensor(Shape{bins, n_fft}, std::move(sc));
  synthesis_sin_ = Tensor(Shape{bins, n_fft}, std::move(ss));
}

std::pair<Tensor, Tensor> StftOperator::forward(const Tensor& waveform) const {
  if (waveform.rank() != 2) {
    throw ShapeError("stft: waveform must be M x D, got " + to_string(waveform.shape()));
  }
  const std::size_t length = waveform.dim(1);
  if (length < cfg_.window_length || length <= cfg_.padding()) {
    throw ShapeError("stft: signal of " + std::to_string(length) +
                     " samples is shorter than one window (" +
                     std::to_string(cfg_.window_length) + ")");
  }
  const std::size_t frames = cfg_.frames(length);
  const std::size_t n_fft = cfg_.fft_size;
  std::vector<std::size_t> index(frames * n_fft);
  const auto pad = static_cast<std::ptrdiff_t>(cfg_.padding());
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < n_fft; ++n)
      index[t * n_fft + n] = reflect(static_cast<std::ptrdiff_t>(t * cfg_.hop + n), pad,
                                     static_cast<std::ptrdiff_t>(length));
  const std::size_t m = waveform.dim(0);
  Tensor framed = ops::reshape(ops::gather_last(waveform, index), {m, frames, n_fft});
  return {ops::matmul(framed, analysis_cos_), ops::matmul(framed, analysis_sin_)};
}

Tensor StftOperator::inverse(const Tensor& real, const Tensor& imag,
                             std::size_t length) const {
  if (real.rank() != 3 || real.shape() != imag.shape() || real.dim(2) != cfg_.bins()) {
    throw ShapeError("istft: spectra must be M x T x " + std::to_string(cfg_.bins()) +
                     ", got " + to_string(real.shape()) + " and " +
                     to_string(imag.shape()));
  }
  const std::size_t m = real.dim(0), frames = real.dim(1), n_fft = cfg_.fft_size;
  if (frames == 0) throw ShapeError("istft: spectrogram has no frames");
  if (length == 0) length = (frames - 1) * cfg_.hop;
  const std::size_t padded = (frames - 1) * cfg_.hop + n_fft;
  const std::size_t pad = cfg_.padding();
  if (pad + length > padded) {
    throw ShapeError("istft: " + std::to_string(frames) + " frames cannot cover " +
                     std::to_string(length) + " samples");
  }
  Tensor time_frames =
      ops::add(ops::matmul(real, synthesis_cos_), ops::matmul(imag, synthesis_sin_));
  std::vector<std::size_t> index(frames * n_fft);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < n_fft; ++n) index[t * n_fft + n] = t * cfg_.hop + n;
  Tensor summed = ops::scatter_add_last(
      ops::reshape(time_frames, {m, frames * n_fft}), index, padded);
  Tensor trimmed = ops::slice(summed, 1, pad, pad + length);
  const auto env = window_envelope(cfg_, frames);
  std::vector<double> inv(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double e = env[pad + i];
    inv[i] = e > 1e-11 ? 1.0 / e : 0.0;
  }
  return ops::mul(trimmed, Tensor(Shape{length}, std::move(inv)));
}

void polar(std::span<const double> real, std::span<const double> imag,
           std::span<double> magnitude, std::span<double> phase) {
  for (std::size_t i = 0; i < real.size(); ++i) {
    magnitude[i] = std::hypot(real[i], imag[i]);
    phase[i] = (real[i] == 0.0 && imag[i] == 0.0) ? 0.0 : std::atan2(imag[i], real[i]);
  }
}

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg) {
  autograd::NoGrad no_grad;
  StftOperator op(cfg);
  Tensor wave(Shape{1, signal.size()}, std::vector<double>(signal.begin(), signal.end()));
  auto [re, im] = op.forward(wave);
  Spectrogram spec;
  spec.frames = re.dim(1);
  spec.bins = re.dim(2);
  spec.config = cfg;
  spec.magnitude.resize(re.numel());
  spec.phase.resize(re.numel());
  polar(re.data(), im.data(), spec.magnitude, spec.phase);
  return spec;
}

std::vector<double> istft(const Spectrogram& spec, std::size_t length) {
  autograd::NoGrad no_grad;
  if (spec.frames == 0) throw ShapeError("istft: spectrogram has no frames");
  if (spec.magnitude.size() != spec.frames * spec.bins ||
      spec.phase.size() != spec.magnitude.size()) {
    throw ShapeError("istft: magnitude/phase sizes disagree with T x F");
  }
  StftOperator op(spec.config);
  const std::size_t n = spec.magnitude.size();
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = spec.magnitude[i] * std::cos(spec.phase[i]);
    im[i] = spec.magnitude[i] * std::sin(spec.phase[i]);
  }
  const Shape shape{1, spec.frames, spec.bins};
  Tensor out = op.inverse(Tensor(shape, std::move(re)), Tensor(shape, std::move(im)), length);
  return {out.data().begin(), out.data().end()};
}

std::vector<double> compress(std::span<const double> magnitude, double c) {
  if (!(c > 0.0 && c <= 1.0)) {
    throw ShapeError("compress: exponent must lie in (0, 1], got " + std::to_string(c));
  }
  std::vector<double> out(magnitude.size());
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    if (!(magnitude[i] >= 0.0)) {
      throw ShapeError("compress: negative magnitude at index " + std::to_string(i));
    }
    out[i] = std::pow(magnitude[i], c);
  }
  return out;
}

std::vector<double> apply_mask(std::span<const double> compressed_magnitude,
                               std::span<const double> mask, double c) {
  if (c == 0.0) throw ShapeError("apply_mask: exponent c must be nonzero");
  if (compressed_magnitude.size() != mask.size()) {
    throw ShapeError("apply_mask: magnitude has " +
                     std::to_string(compressed_magnitude.size()) +
                     " entries, mask has " + std::to_string(mask.size()));
  }
  std::vector<double> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!(mask[i] >= 0.0) || !(compressed_magnitude[i] >= 0.0)) {
      throw ShapeError("apply_mask: negative entry at index " + std::to_string(i));
    }
    out[i] = std::pow(compressed_magnitude[i] * mask[i], 1.0 / c);
  }
  return out;
}

}  // namespace mambattn::dsp
