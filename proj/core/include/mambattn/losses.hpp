// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "mambattn/dsp.hpp"
#include "mambattn/layers.hpp"

namespace mambattn::losses {

struct LossWeights {
  double time = 0.2;
  double magnitude = 0.9;
  double complex = 0.1;
  double phase = 0.3;
  double consistency = 0.1;
  double adversarial = 0.05;

  void validate() const;  // all nonnegative
};

/// Mean absolute error between two waveforms of equal shape.
Tensor loss_time(const Tensor& clean, const Tensor& estimate);

/// Mean squared error between magnitude spectra.
Tensor loss_mag(const Tensor& clean, const Tensor& estimate);

/// MSE on real parts plus MSE on imaginary parts.
Tensor loss_complex(const Tensor& clean_real, const Tensor& clean_imag,
                    const Tensor& est_real, const Tensor& est_imag);

struct PhaseTerms {
  Tensor instantaneous;  // IP
  Tensor group_delay;    // GD, differences along the last (frequency) axis
  Tensor frequency;      // IAF, differences along the frame axis
  Tensor total;
};

/// Phases are ... x T x F. Differences are forward differences, so each
/// difference array is one shorter along its axis.
PhaseTerms loss_phase_terms(const Tensor& clean, const Tensor& estimate);
Tensor loss_phase(const Tensor& clean, const Tensor& estimate);

/// Sum over real and imaginary parts of the mean squared distance between a
/// spectrum (M x T x F) and the STFT of its own iSTFT. `length` is the
/// waveform length used for the round trip; 0 means (T - 1) * hop.
Tensor loss_consistency(const Tensor& real, const Tensor& imag,
                        const dsp::StftOperator& stft, std::size_t length = 0);

/// (re, im) scaled by (re^2 + im^2 + eps)^((c - 1) / 2), i.e. the spectrum
/// with its magnitude compressed to roughly |X|^c. eps keeps the gradient
/// finite at empty bins.
std::pair<Tensor, Tensor> compress_spectrum(const Tensor& real, const Tensor& imag,
                                            double c, double eps = 1e-9);

/// Consistency in the compressed domain: (real_c, imag_c) against the
/// compressed STFT of `waveform`, which must be the iSTFT of the
/// decompressed spectrum.
Tensor loss_consistency_compressed(const Tensor& real_c, const Tensor& imag_c,
                                   const Tensor& waveform, const dsp::StftOperator& stft,
                                   double c);

/// Conv stack on the stacked pair (M x 2 x T x F): three stride-2 blocks
/// (conv, instance norm, PReLU) growing 2 -> 16 -> 32 -> 64 channels, a final
/// stride-2 conv to one channel, global mean, sigmoid. Output M values in
/// [0, 1].
class Discriminator : public nn::Module {
 public:
  Discriminator() = default;
  explicit Discriminator(nn::Rng& rng, std::size_t base_channels = 16);

  Tensor forward(const Tensor& reference, const Tensor& estimate) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  std::vector<nn::ConvBlock> blocks;
  nn::Conv2d head;
};

/// Mean over the batch of (D(X, X) - 1)^2 + (D(X, X_hat) - Q)^2. `quality`
/// holds one target in [0, 1] per batch element.
Tensor loss_discriminator(const Tensor& d_clean, const Tensor& d_estimate,
                          std::span<const double> quality);

/// Mean over the batch of (D(X, X_hat) - 1)^2.
Tensor loss_adversarial_generator(const Tensor& d_estimate);

/// Default quality target: sigmoid((si_sdr - 10) / 5).
double quality_from_si_sdr(double si_sdr_db);

struct GeneratorTerms {
  Tensor time, magnitude, complex, phase, consistency, adversarial;
};

/// Weighted sum of the six generator terms.
Tensor generator_total(const GeneratorTerms& terms, const LossWeights& w);

}  // namespace mambattn::losses
