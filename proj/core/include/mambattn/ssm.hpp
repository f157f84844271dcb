// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mambattn/layers.hpp"

namespace mambattn::ssm {

struct Discretized {
  std::vector<double> a_bar;  // N x K, exp(delta_k * a_nk)
  std::vector<double> b_bar;  // N x K, delta_k * b_n
};

/// Zero-order hold with the first-order input matrix: A_bar = exp(delta A),
/// B_bar = delta B. `a` is N x K, `b` has N entries, `delta` K entries (> 0).
Discretized discretize_zoh(std::span<const double> a, std::span<const double> b,
                           std::span<const double> delta, std::size_t n,
                           std::size_t k);

struct MambaConfig {
  std::size_t d_model = 64;
  std::size_t expand = 4;
  std::size_t d_state = 16;
  std::size_t conv_width = 4;
  std::size_t dt_rank = 0;  // 0 means ceil(d_model / 16)
  double dt_min = 1e-3;
  double dt_max = 1e-1;
  bool zero_init_output = false;

  std::size_t inner() const { return expand * d_model; }
  std::size_t rank() const { return dt_rank != 0 ? dt_rank : (d_model + 15) / 16; }
};

/// Selective-SSM layer on channels-last sequences (Bt x L x d_model).
///   [u, z] = x W_in;  u = SiLU(causal_conv(u))
///   delta = softplus(u W_1 W_2 + delta_bias),  B = u W_B,  C = u W_C
///   y = scan(u, delta, -exp(A_log), B, C) * SiLU(z);  out = y W_out
class MambaLayer : public nn::Module {
 public:
  MambaLayer() = default;
  MambaLayer(const MambaConfig& cfg, nn::Rng& rng);

  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  MambaConfig config;
  Tensor in_proj;      // d_model x 2*inner
  Tensor conv_weight;  // inner x conv_width
  Tensor conv_bias;    // inner
  Tensor w1;           // inner x rank
  Tensor w2;           // rank x inner
  Tensor delta_bias;   // inner
  Tensor w_b;          // inner x N
  Tensor w_c;          // inner x N
  Tensor a_log;        // N x inner
  Tensor out_proj;     // inner x d_model
};

/// merge(concat(fwd(x), flip(bwd(flip(x))))) with flips along the sequence
/// axis and a width-1 convolution (2K -> K) as the merge.
class BiMamba : public nn::Module {
 public:
  BiMamba() = default;
  BiMamba(const MambaConfig& cfg, nn::Rng& rng);
  BiMamba(std::shared_ptr<MambaLayer> fwd, std::shared_ptr<MambaLayer> bwd,
          nn::Linear merge);

  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  std::shared_ptr<MambaLayer> forward_layer;
  std::shared_ptr<MambaLayer> backward_layer;
  nn::Linear merge;
};

}  // namespace mambattn::ssm
