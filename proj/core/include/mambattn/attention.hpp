// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <memory>
#include <utility>

#include "mambattn/layers.hpp"

namespace mambattn::attention {

/// softmax(Q K^T / sqrt(d_k)) V over the trailing two axes; leading axes of
/// Q, K and V must agree.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k,
                                    const Tensor& v);

/// Fused per-head projections: head i uses columns [i*d_k, (i+1)*d_k) of
/// w_q/w_k/w_v and rows [i*d_k, (i+1)*d_k) of w_o.
class MhaWeights : public nn::Module {
 public:
  MhaWeights() = default;
  MhaWeights(std::size_t d_model, std::size_t heads, bool bias, nn::Rng& rng);

  std::size_t d_model() const { return d_model_; }
  std::size_t heads() const { return heads_; }
  std::size_t head_dim() const { return d_model_ / heads_; }
  bool has_bias() const { return b_q.defined(); }

  void visit(const std::string& prefix, const nn::ParamVisitor& fn) override;

  Tensor w_q, w_k, w_v, w_o;  // d_model x d_model
  Tensor b_q, b_k, b_v, b_o;  // d_model, undefined without bias

 private:
  std::size_t d_model_ = 0;
  std::size_t heads_ = 1;
};

/// Self-attention of X (Bt x L x d_model): heads attend independently,
/// are concatenated and projected by w_o.
Tensor multi_head_attention(const Tensor& x, const MhaWeights& w);

/// Same result as multi_head_attention without recording, computed in
/// query blocks so the L x L score matrix is never held whole.
Tensor multi_head_attention_inference(const Tensor& x, const MhaWeights& w,
                                      std::size_t query_block = 256);

/// Time and frequency attention sites. Both hold one MhaWeights object when
/// shared. The unshared pair holds two independent copies that start from
/// the same values.
struct AttentionPair {
  std::shared_ptr<MhaWeights> time;
  std::shared_ptr<MhaWeights> freq;
  bool shared() const { return time == freq; }
};

AttentionPair make_shared_pair(std::size_t d_model, std::size_t heads, bool bias,
                               nn::Rng& rng);
AttentionPair make_unshared_pair(std::size_t d_model, std::size_t heads, bool bias,
                                 nn::Rng& rng);

}  // namespace mambattn::attention
