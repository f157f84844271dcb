// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mambattn/error.hpp"
#include "mambattn/kernels.hpp"

namespace mambattn::attention {

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k,
                                    const Tensor& v) {
  if (q.rank() < 2) {
    throw ShapeError("attention: Q must have rank >= 2, got " + to_string(q.shape()));
  }
  const std::size_t dk = q.dim(q.rank() - 1);
  if (dk == 0) throw ShapeError("attention: d_k is zero");
  Tensor scores = ops::scale(ops::matmul(q, k, false, true),
                             1.0 / std::sqrt(static_cast<double>(dk)));
  return ops::matmul(ops::softmax(scores), v);
}

MhaWeights::MhaWeights(std::size_t d_model, std::size_t heads, bool bias, nn::Rng& rng)
    : d_model_(d_model), heads_(heads) {
  if (heads == 0 || d_model == 0 || d_model % heads != 0) {
    throw ShapeError("mha: d_model " + std::to_string(d_model) +
                     " is not divisible by heads " + std::to_string(heads));
  }
  w_q = nn::uniform_parameter({d_model, d_model}, d_model, rng);
  w_k = nn::uniform_parameter({d_model, d_model}, d_model, rng);
  w_v = nn::uniform_parameter({d_model, d_model}, d_model, rng);
  w_o = nn::uniform_parameter({d_model, d_model}, d_model, rng);
  if (bias) {
    b_q = nn::constant_parameter({d_model}, 0.0);
    b_k = nn::constant_parameter({d_model}, 0.0);
    b_v = nn::constant_parameter({d_model}, 0.0);
    b_o = nn::constant_parameter({d_model}, 0.0);
  }
}

void MhaWeights::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
  fn(nn::join(prefix, "w_q"), w_q);
  fn(nn::join(prefix, "w_k"), w_k);
  fn(nn::join(prefix, "w_v"), w_v);
  fn(nn::join(prefix, "w_o"), w_o);
  if (has_bias()) {
    fn(nn::join(prefix, "b_q"), b_q);
    fn(nn::join(prefix, "b_k"), b_k);
    fn(nn::join(prefix, "b_v"), b_v);
    fn(nn::join(prefix, "b_o"), b_o);
  }
}

namespace {

Tensor project(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = ops::matmul(x, w);
  return b.defined() ? ops::add(y, b) : y;
}

void check_input(const Tensor& x, const MhaWeights& w) {
  if (x.rank() != 3 || x.dim(2) != w.d_model()) {
    throw ShapeError("mha: input must be Bt x L x " + std::to_string(w.d_model()) +
                     ", got " + to_string(x.shape()));
  }
}

}  // namespace

Tensor multi_head_attention(const Tensor& x, const MhaWeights& w) {
  check_input(x, w);
  const std::size_t bt = x.dim(0), len = x.dim(1), h = w.heads(), dk = w.head_dim();
  auto split_heads = [&](const Tensor& t) {
    return ops::permute(ops::reshape(t, {bt, len, h, dk}), {0, 2, 1, 3});
  };
  Tensor q = split_heads(project(x, w.w_q, w.b_q));
  Tensor k = split_heads(project(x, w.w_k, w.b_k));
  Tensor v = split_heads(project(x, w.w_v, w.b_v));
  Tensor heads = scaled_dot_product_attention(q, k, v);
  Tensor merged =
      ops::reshape(ops::permute(heads, {0, 2, 1, 3}), {bt, len, w.d_model()});
  return project(merged, w.w_o, w.b_o);
}

Tensor multi_head_attention_inference(const Tensor& x, const MhaWeights& w,
                                      std::size_t query_block) {
  check_input(x, w);
  autograd::NoGrad no_grad;
  const std::size_t bt = x.dim(0), len = x.dim(1), dm = w.d_model(), h = w.heads(),
                    dk = w.head_dim();
  if (query_block == 0) query_block = 256;
  const Tensor q = project(x, w.w_q, w.b_q);
  const Tensor k = project(x, w.w_k, w.b_k);
  const Tensor v = project(x, w.w_v, w.b_v);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  Tensor merged(Shape{bt, len, dm});
  std::vector<double> qh(query_block * dk), kh(len * dk), kt(dk * len), vh(len * dk),
      scores(query_block * len), out(query_block * dk);
  for (std::size_t s = 0; s < bt; ++s) {
    for (std::size_t head = 0; head < h; ++head) {
      const std::size_t col = head * dk;
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < dk; ++j) {
          kh[i * dk + j] = k.data()[(s * len + i) * dm + col + j];
          vh[i * dk + j] = v.data()[(s * len + i) * dm + col + j];
        }
      kernels::transpose(kh.data(), len, dk, kt.data());
      for (std::size_t q0 = 0; q0 < len; q0 += query_block) {
        const std::size_t rows = std::min(query_block, len - q0);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < dk; ++j)
            qh[i * dk + j] = q.data()[(s * len + q0 + i) * dm + col + j];
        kernels::gemm(rows, len, dk, qh.data(), dk, kt.data(), len, scores.data(), len,
                      false);
        for (std::size_t i = 0; i < rows; ++i) {
          double* row = scores.data() + i * len;
          double peak = -INFINITY;
          for (std::size_t j = 0; j < len; ++j) {
            row[j] *= inv;
            peak = std::max(peak, row[j]);
          }
          double total = 0.0;
          for (std::size_t j = 0; j < len; ++j) {
            row[j] = std::exp(row[j] - peak);
            total += row[j];
          }
          const double norm = 1.0 / total;
          for (std::size_t j = 0; j < len; ++j) row[j] *= norm;
        }
        kernels::gemm(rows, dk, len, scores.data(), len, vh.data(), dk, out.data(), dk,
                      false);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < dk; ++j)
            merged.data()[(s * len + q0 + i) * dm + col + j] = out[i * dk + j];
      }
    }
  }
  return project(merged, w.w_o, w.b_o);
}

AttentionPair make_shared_pair(std::size_t d_model, std::size_t heads, bool bias,
                               nn::Rng& rng) {
  auto w = std::make_shared<MhaWeights>(d_model, heads, bias, rng);
  return {w, w};
}

AttentionPair make_unshared_pair(std::size_t d_model, std::size_t heads, bool bias,
                                 nn::Rng& rng) {
  auto time = std::make_shared<MhaWeights>(d_model, heads, bias, rng);
  auto freq = std::make_shared<MhaWeights>(*time);
  freq->visit("", [](const std::string&, Tensor& t) {
    t = t.clone();
    t.set_requires_grad(true);
  });
  return {time, freq};
}

}  // namespace mambattn::attention
