// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/net.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mambattn/error.hpp"

namespace mambattn::net {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kShared: return "shared";
    case Variant::kUnshared: return "unshared";
    case Variant::kAttentionAfter: return "attention_after";
    case Variant::kNoAttention: return "no_attention";
  }
  return "shared";
}

Variant parse_variant(const std::string& text) {
  if (text == "shared") return Variant::kShared;
  if (text == "unshared") return Variant::kUnshared;
  if (text == "attention_after") return Variant::kAttentionAfter;
  if (text == "no_attention") return Variant::kNoAttention;
  throw ShapeError("unknown variant '" + text +
                   "' (expected shared, unshared, attention_after or no_attention)");
}

void ModelConfig::validate() const {
  if (channels == 0 || heads == 0 || channels % heads != 0) {
    throw ShapeError("model config: channels " + std::to_string(channels) +
                     " must be a positive multiple of heads " + std::to_string(heads));
  }
  if (layers == 0) throw ShapeError("model config: layers must be >= 1");
  if (expand == 0 || ssm_state == 0 || conv_width == 0 || dense_depth == 0) {
    throw ShapeError("model config: expand, ssm_state, conv_width and dense_depth must be positive");
  }
  if (!(compression > 0.0 && compression <= 1.0)) {
    throw ShapeError("model config: compression must lie in (0, 1]");
  }
  if (!(sigmoid_beta > 0.0)) throw ShapeError("model config: sigmoid_beta must be positive");
  stft.validate();
  if (stft.bins() < 3) throw ShapeError("model config: need at least 3 frequency bins");
}

ssm::MambaConfig ModelConfig::mamba() const {
  ssm::MambaConfig m;
  m.d_model = channels;
  m.expand = expand;
  m.d_state = ssm_state;
  m.conv_width = conv_width;
  return m;
}

namespace {

ops::Conv2dOptions freq_stride2() {
  ops::Conv2dOptions o;
  o.stride = {1, 2};
  return o;
}

}  // namespace

Encoder::Encoder(const ModelConfig& cfg, nn::Rng& rng)
    : input(2, cfg.channels, 1, 1, {}, false, rng),
      dense(cfg.channels, cfg.dense_depth, rng),
      downsample(cfg.channels, cfg.channels, 1, 3, freq_stride2(), false, rng) {}

Tensor Encoder::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != 2) {
    throw ShapeError("encoder: input must be M x 2 x T x F, got " + mambattn::to_string(x.shape()));
  }
  if (x.dim(3) < 3) {
    throw ShapeError("encoder: F = " + std::to_string(x.dim(3)) + " is too small to halve");
  }
  return downsample.forward(dense.forward(input.forward(x)));
}

void Encoder::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  input.visit(nn::join(prefix, "input"), fn);
  dense.visit(nn::join(prefix, "dense"), fn);
  downsample.visit(nn::join(prefix, "downsample"), fn);
}

MambAttentionBlock::MambAttentionBlock(const ModelConfig& cfg, nn::Rng& rng)
    : variant(cfg.variant) {
  if (variant != Variant::kNoAttention) {
    time_norm = nn::LayerNorm(cfg.channels);
    freq_norm = nn::LayerNorm(cfg.channels);
    attention = variant == Variant::kUnshared
                    ? attention::make_unshared_pair(cfg.channels, cfg.heads,
                                                    cfg.attention_bias, rng)
                    : attention::make_shared_pair(cfg.channels, cfg.heads,
                                                  cfg.attention_bias, rng);
    if (cfg.zero_init_residual) {
      for (auto* w : {attention.time.get(), attention.freq.get()}) {
        std::fill(w->w_o.data().begin(), w->w_o.data().end(), 0.0);
      }
    }
  }
  time_mamba = ssm::BiMamba(cfg.mamba(), rng);
  freq_mamba = ssm::BiMamba(cfg.mamba(), rng);
  if (cfg.zero_init_residual) {
    for (auto* m : {&time_mamba, &freq_mamba}) {
      std::fill(m->merge.weight.data().begin(), m->merge.weight.data().end(), 0.0);
    }
  }
}

Tensor MambAttentionBlock::attend(const Tensor& x, const nn::LayerNorm& norm,
                                  const attention::MhaWeights& w) const {
  return ops::add(x, attention::multi_head_attention(norm.forward(x), w));
}

Tensor MambAttentionBlock::sequence_path(const Tensor& x, const nn::LayerNorm& norm,
                                         const attention::MhaWeights* w,
                                         const ssm::BiMamba& mamba) const {
  switch (variant) {
    case Variant::kNoAttention:
      return ops::add(x, mamba.forward(x));
    case Variant::kAttentionAfter: {
      Tensor x1 = ops::add(x, mamba.forward(x));
      return attend(x1, norm, *w);
    }
    case Variant::kShared:
    case Variant::kUnshared:
      break;
  }
  Tensor x1 = attend(x, norm, *w);
  return ops::add(x1, mamba.forward(x1));
}

Tensor MambAttentionBlock::forward(const Tensor& x) const {
  if (x.rank() != 4) {
    throw ShapeError("block: input must be M x K x T x F', got " + mambattn::to_string(x.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), t = x.dim(2), f = x.dim(3);
  // M x K x T x F' -> (M F') x T x K
  Tensor seq = ops::reshape(ops::permute(x, {0, 3, 2, 1}), {m * f, t, k});
  seq = sequence_path(seq, time_norm, attention.time.get(), time_mamba);
  // (M F') x T x K -> (M T) x F' x K
  seq = ops::reshape(ops::permute(ops::reshape(seq, {m, f, t, k}), {0, 2, 1, 3}),
                     {m * t, f, k});
  seq = sequence_path(seq, freq_norm, attention.freq.get(), freq_mamba);
  // (M T) x F' x K -> M x K x T x F'
  return ops::permute(ops::reshape(seq, {m, t, f, k}), {0, 3, 1, 2});
}

void MambAttentionBlock::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  if (variant != Variant::kNoAttention) {
    time_norm.visit(nn::join(prefix, "time_norm"), fn);
    attention.time->visit(nn::join(prefix, "time_mha"), fn);
    time_mamba.visit(nn::join(prefix, "time_mamba"), fn);
    freq_norm.visit(nn::join(prefix, "freq_norm"), fn);
    attention.freq->visit(nn::join(prefix, "freq_mha"), fn);
    freq_mamba.visit(nn::join(prefix, "freq_mamba"), fn);
    return;
  }
  time_mamba.visit(nn::join(prefix, "time_mamba"), fn);
  freq_mamba.visit(nn::join(prefix, "freq_mamba"), fn);
}

MaskDecoder::MaskDecoder(const ModelConfig& cfg, nn::Rng& rng)
    : beta(cfg.sigmoid_beta),
      dense(cfg.channels, cfg.dense_depth, rng),
      upsample(cfg.channels, cfg.channels, 1, 3, freq_stride2(), true, rng),
      project(cfg.channels, 1, 1, 1, {}, rng),
      alpha(nn::constant_parameter({cfg.stft.bins()}, 1.0)) {}

Tensor MaskDecoder::forward(const Tensor& x) const {
  Tensor y = project.forward(upsample.forward(dense.forward(x)));
  const std::size_t m = y.dim(0), t = y.dim(2), f = y.dim(3);
  if (f != alpha.numel()) {
    throw ShapeError("mask decoder: restored F = " + std::to_string(f) + " but expected " +
                     std::to_string(alpha.numel()));
  }
  y = ops::reshape(y, {m, t, f});
  return ops::scale(ops::sigmoid(ops::mul(y, alpha)), beta);
}

void MaskDecoder::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  dense.visit(nn::join(prefix, "dense"), fn);
  upsample.visit(nn::join(prefix, "upsample"), fn);
  project.visit(nn::join(prefix, "project"), fn);
  fn(nn::join(prefix, "alpha"), alpha);
}

PhaseDecoder::PhaseDecoder(const ModelConfig& cfg, nn::Rng& rng)
    : dense(cfg.channels, cfg.dense_depth, rng),
      upsample(cfg.channels, cfg.channels, 1, 3, freq_stride2(), true, rng),
      real(cfg.channels, 1, 1, 1, {}, rng),
      imag(cfg.channels, 1, 1, 1, {}, rng) {}

Tensor PhaseDecoder::forward(const Tensor& x) const {
  Tensor y = upsample.forward(dense.forward(x));
  Tensor r = real.forward(y);
  Tensor i = imag.forward(y);
  const Shape s{r.dim(0), r.dim(2), r.dim(3)};
  return ops::atan2(ops::reshape(i, s), ops::reshape(r, s));
}

void PhaseDecoder::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  dense.visit(nn::join(prefix, "dense"), fn);
  upsample.visit(nn::join(prefix, "upsample"), fn);
  real.visit(nn::join(prefix, "real"), fn);
  imag.visit(nn::join(prefix, "imag"), fn);
}

SpectralFeatures analyze(const dsp::StftOperator& stft, const Tensor& waveform,
                         double compression) {
  autograd::NoGrad no_grad;
  auto [re, im] = stft.forward(waveform);
  SpectralFeatures out;
  out.compressed = Tensor(re.shape());
  out.phase = Tensor(re.shape());
  out.real = Tensor(re.shape());
  out.imag = Tensor(re.shape());
  dsp::polar(re.data(), im.data(), out.compressed.data(), out.phase.data());
  for (std::size_t i = 0; i < re.numel(); ++i) {
    const double cm = std::pow(out.compressed.data()[i], compression);
    out.compressed.data()[i] = cm;
    out.real.data()[i] = cm * std::cos(out.phase.data()[i]);
    out.imag.data()[i] = cm * std::sin(out.phase.data()[i]);
  }
  return out;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : config_(cfg), stft_(cfg.stft) {
  cfg.validate();
  nn::Rng rng(seed);
  encoder = Encoder(cfg, rng);
  for (std::size_t r = 0; r < cfg.layers; ++r) blocks.emplace_back(cfg, rng);
  mask_decoder = MaskDecoder(cfg, rng);
  phase_decoder = PhaseDecoder(cfg, rng);
}

Tensor Model::encode(const Tensor& compressed, const Tensor& phase) const {
  if (compressed.rank() != 3 || compressed.shape() != phase.shape()) {
    throw ShapeError("model: magnitude " + mambattn::to_string(compressed.shape()) + " and phase " +
                     mambattn::to_string(phase.shape()) + " must both be M x T x F");
  }
  const std::size_t m = compressed.dim(0), t = compressed.dim(1), f = compressed.dim(2);
  Tensor x = ops::concat({ops::reshape(compressed, {m, 1, t, f}),
                          ops::reshape(phase, {m, 1, t, f})},
                         1);
  Tensor latent = encoder.forward(x);
  for (const auto& block : blocks) latent = block.forward(latent);
  return latent;
}

ModelOutput Model::forward(const Tensor& waveform) const {
  if (waveform.rank() != 2) {
    throw ShapeError("model: waveform must be M x D, got " + mambattn::to_string(waveform.shape()));
  }
  const std::size_t length = waveform.dim(1);
  const SpectralFeatures in = analyze(stft_, waveform, config_.compression);
  Tensor latent = encode(in.compressed, in.phase);

  ModelOutput out;
  out.mask = mask_decoder.forward(latent);
  out.phase = phase_decoder.forward(latent);
  out.compressed = ops::mul(in.compressed, out.mask);
  out.magnitude = ops::power(out.compressed, 1.0 / config_.compression);
  Tensor cos_p = ops::cos(out.phase);
  Tensor sin_p = ops::sin(out.phase);
  out.real = ops::mul(out.compressed, cos_p);
  out.imag = ops::mul(out.compressed, sin_p);
  out.linear_real = ops::mul(out.magnitude, cos_p);
  out.linear_imag = ops::mul(out.magnitude, sin_p);
  out.waveform = stft_.inverse(out.linear_real, out.linear_imag, length);
  return out;
}

void Model::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  encoder.visit(nn::join(prefix, "encoder"), fn);
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    blocks[r].visit(nn::join(prefix, "blocks." + std::to_string(r)), fn);
  }
  mask_decoder.visit(nn::join(prefix, "mask_decoder"), fn);
  phase_decoder.visit(nn::join(prefix, "phase_decoder"), fn);
}

std::size_t count_parameters(const ModelConfig& cfg) {
  return parameter_breakdown(cfg).total;
}

ParameterBreakdown parameter_breakdown(const ModelConfig& cfg) {
  Model model(cfg);
  ParameterBreakdown b;
  b.encoder = model.encoder.parameter_count();
  for (auto& block : model.blocks) {
    b.blocks += block.parameter_count();
    if (block.variant != Variant::kNoAttention) {
      b.attention += block.attention.time->parameter_count();
      if (!block.attention.shared()) b.attention += block.attention.freq->parameter_count();
    }
  }
  b.mask_decoder = model.mask_decoder.parameter_count();
  b.phase_decoder = model.phase_decoder.parameter_count();
  b.total = model.parameter_count();
  return b;
}

}  // namespace mambattn::net
