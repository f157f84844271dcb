// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mambattn/attention.hpp"
#include "mambattn/dsp.hpp"
#include "mambattn/layers.hpp"
#include "mambattn/ssm.hpp"

namespace mambattn::net {

enum class Variant { kShared, kUnshared, kAttentionAfter, kNoAttention };

std::string to_string(Variant v);
/// Accepts shared, unshared, attention_after, no_attention.
Variant parse_variant(const std::string& text);

struct ModelConfig {
  std::size_t channels = 64;  // K (= d_model)
  std::size_t layers = 4;     // R
  std::size_t heads = 8;
  std::size_t expand = 4;     // E_f
  std::size_t ssm_state = 16;  // N
  std::size_t conv_width = 4;
  std::size_t dense_depth = 4;
  double compression = 0.3;
  double sigmoid_beta = 2.0;
  Variant variant = Variant::kShared;
  bool attention_bias = true;
  // Zero the output projections of every residual branch (MHA and Mamba).
  bool zero_init_residual = false;
  dsp::StftConfig stft;

  void validate() const;
  ssm::MambaConfig mamba() const;
  bool operator==(const ModelConfig&) const = default;
};

/// conv block (2 -> K, 1x1), dilated DenseNet, conv block (K -> K, 1x3,
/// frequency stride 2). Input M x 2 x T x F, output M x K x T x F'.
class Encoder : public nn::Module {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& cfg, nn::Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  nn::ConvBlock input;
  nn::DilatedDenseNet dense;
  nn::ConvBlock downsample;
};

/// One dual-path layer: T-attention and T-Mamba over frames, then
/// F-attention and F-Mamba over frequency bins.
class MambAttentionBlock : public nn::Module {
 public:
  MambAttentionBlock() = default;
  MambAttentionBlock(const ModelConfig& cfg, nn::Rng& rng);

  /// x: M x K x T x F'.
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  /// Residual sub-steps on a Bt x L x K sequence.
  Tensor attend(const Tensor& x, const nn::LayerNorm& norm,
                const attention::MhaWeights& w) const;
  Tensor sequence_path(const Tensor& x, const nn::LayerNorm& norm,
                       const attention::MhaWeights* w, const ssm::BiMamba& mamba) const;

  Variant variant = Variant::kShared;
  nn::LayerNorm time_norm, freq_norm;
  attention::AttentionPair attention;
  ssm::BiMamba time_mamba, freq_mamba;
};

/// DenseNet, transposed conv block (F' -> F), conv K -> 1, learnable sigmoid
/// beta * sigmoid(alpha_f x). Output mask M x T x F.
class MaskDecoder : public nn::Module {
 public:
  MaskDecoder() = default;
  MaskDecoder(const ModelConfig& cfg, nn::Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  double beta = 2.0;
  nn::DilatedDenseNet dense;
  nn::ConvBlock upsample;
  nn::Conv2d project;
  Tensor alpha;  // F
};

/// DenseNet, transposed conv block, then parallel 1x1 convs R and I;
/// output atan2(I, R), M x T x F.
class PhaseDecoder : public nn::Module {
 public:
  PhaseDecoder() = default;
  PhaseDecoder(const ModelConfig& cfg, nn::Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  nn::DilatedDenseNet dense;
  nn::ConvBlock upsample;
  nn::Conv2d real, imag;
};

struct ModelOutput {
  Tensor waveform;         // M x D
  Tensor magnitude;        // M x T x F, linear (mask applied, decompressed)
  Tensor compressed;       // M x T x F, (Y_m)^c * mask
  Tensor phase;            // M x T x F
  Tensor mask;             // M x T x F
  Tensor real, imag;       // M x T x F, compressed-domain complex spectrum
  Tensor linear_real, linear_imag;  // M x T x F, spectrum fed to the iSTFT
};

/// Compressed magnitude and phase of a batch of waveforms, computed without
/// recording. Used for inputs and training targets.
struct SpectralFeatures {
  Tensor compressed;  // M x T x F
  Tensor phase;       // M x T x F
  Tensor real, imag;  // compressed-domain complex
};
SpectralFeatures analyze(const dsp::StftOperator& stft, const Tensor& waveform,
                         double compression);

class Model : public nn::Module {
 public:
  explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  const dsp::StftOperator& stft() const { return stft_; }

  /// waveform: M x D noisy signals.
  ModelOutput forward(const Tensor& waveform) const;
  /// Latent pipeline on already-computed input features.
  Tensor encode(const Tensor& compressed, const Tensor& phase) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  Encoder encoder;
  std::vector<MambAttentionBlock> blocks;
  MaskDecoder mask_decoder;
  PhaseDecoder phase_decoder;

 private:
  ModelConfig config_;
  dsp::StftOperator stft_;
};

/// Trainable scalar count of a freshly built model.
std::size_t count_parameters(const ModelConfig& cfg);

/// Per-component breakdown used by the parameter audit.
struct ParameterBreakdown {
  std::size_t encoder = 0;
  std::size_t blocks = 0;
  std::size_t attention = 0;  // included in blocks
  std::size_t mask_decoder = 0;
  std::size_t phase_decoder = 0;
  std::size_t total = 0;
};
ParameterBreakdown parameter_breakdown(const ModelConfig& cfg);

}  // namespace mambattn::net
