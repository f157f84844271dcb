// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mambattn/tensor.hpp"

namespace mambattn::dsp {

struct StftConfig {
  std::size_t fft_size = 400;
  std::size_t window_length = 400;
  std::size_t hop = 100;

  /// Throws ShapeError unless hop <= window_length <= fft_size.
  void validate() const;
  std::size_t bins() const { return fft_size / 2 + 1; }
  /// Reflection padding applied to each end of the signal.
  std::size_t padding() const { return fft_size / 2; }
  /// Number of frames for a signal of `samples` samples.
  std::size_t frames(std::size_t samples) const {
    return 1 + (samples + 2 * padding() - fft_size) / hop;
  }
  /// Periodic Hann window of window_length, zero-padded (centered) to fft_size.
  std::vector<double> window() const;

  bool operator==(const StftConfig&) const = default;
};

/// T x F magnitude and wrapped phase, row-major with frames as rows.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> magnitude;
  std::vector<double> phase;
  StftConfig config;
};

Spectrogram stft(std::span<const double> signal, const StftConfig& cfg = {});

/// Overlap-add inverse with squared-window normalization. `length` is the
/// number of output samples; 0 means (frames - 1) * hop.
std::vector<double> istft(const Spectrogram& spec, std::size_t length = 0);

/// Elementwise m^c; entries must be nonnegative and 0 < c <= 1.
std::vector<double> compress(std::span<const double> magnitude, double c);

/// ((Y_m)^c . mask)^(1/c) given the already-compressed magnitude (Y_m)^c.
std::vector<double> apply_mask(std::span<const double> compressed_magnitude,
                               std::span<const double> mask, double c);

/// Batched STFT / iSTFT as differentiable tensor programs (framing gather,
/// DFT-basis matmul, windowed overlap-add scatter). Waveforms are M x D,
/// spectra M x T x F real/imaginary pairs.
class StftOperator {
 public:
  explicit StftOperator(StftConfig cfg = {});

  const StftConfig& config() const { return cfg_; }

  std::pair<Tensor, Tensor> forward(const Tensor& waveform) const;
  Tensor inverse(const Tensor& real, const Tensor& imag,
                 std::size_t length) const;

 private:
  StftConfig cfg_;
  Tensor window_;         // fft_size
  Tensor analysis_cos_;   // fft_size x F, window folded in
  Tensor analysis_sin_;   // fft_size x F, window folded in, negated
  Tensor synthesis_cos_;  // F x fft_size, window folded in
  Tensor synthesis_sin_;  // F x fft_size, window folded in
};

/// Magnitude and phase (atan2, zero where both parts vanish) of a spectrum.
void polar(std::span<const double> real, std::span<const double> imag,
           std::span<double> magnitude, std::span<double> phase);

}  // namespace mambattn::dsp
