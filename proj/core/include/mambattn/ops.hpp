// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mambattn/tensor.hpp"

// Differentiable primitives. Every function records a node on the active
// tape when one of its inputs requires a gradient; otherwise it is a plain
// forward computation.
namespace mambattn::ops {

// Elementwise binary ops broadcast numpy-style.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor sin(const Tensor& x);

inline constexpr double kPowerEpsilon = 1e-12;

/// x^p for x >= 0. For p < 1 the derivative is evaluated at x + 1e-12 so a
/// zero base yields a finite gradient.
Tensor power(const Tensor& x, double exponent);

/// |t - 2*pi*round(t / 2*pi)|: distance to the nearest multiple of 2*pi.
Tensor anti_wrap(const Tensor& x);

/// Elementwise two-argument arctangent atan2(y, x), range (-pi, pi].
/// atan2(0, 0) is 0 with a zero gradient.
Tensor atan2(const Tensor& y, const Tensor& x);

/// max(0,x) + slope_c * min(0,x) with one slope per index along
/// `channel_axis` (a single-element slope is shared by all channels).
Tensor prelu(const Tensor& x, const Tensor& slope, std::size_t channel_axis);

Tensor softmax(const Tensor& x);  // last axis

inline constexpr double kNormEpsilon = 1e-5;

/// Normalizes the last axis, then applies gamma/beta (both of that length).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kNormEpsilon);

/// x: M x C x H x W. Normalizes each (m, c) plane, then per-channel affine.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps = kNormEpsilon);

/// Batched matrix product over the trailing two axes. `b` may be rank 2
/// (shared across the batch) or carry the same leading axes as `a`.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);

struct Conv2dOptions {
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> dilation{1, 1};
  std::array<std::size_t, 4> padding{0, 0, 0, 0};  // top, bottom, left, right
  std::array<std::size_t, 2> output_padding{0, 0};  // transposed conv only
};

/// x: M x Cin x H x W, weight: Cout x Cin x kh x kw, bias: Cout or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& opts = {});

/// x: M x Cin x H x W, weight: Cin x Cout x kh x kw, bias: Cout or undefined.
/// Output extent (H-1)*s - pt - pb + d*(k-1) + output_padding + 1.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, const Conv2dOptions& opts = {});

/// x: B x Cin x L, weight: Cout x Cin x k, bias: Cout or undefined.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t dilation = 1,
              std::size_t pad_left = 0, std::size_t pad_right = 0);

/// Per-channel causal convolution on channels-last input.
/// x: B x L x C, weight: C x k, bias: C. y[l] sees x[l-k+1 .. l].
Tensor causal_depthwise_conv1d(const Tensor& x, const Tensor& weight,
                               const Tensor& bias);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor transpose(const Tensor& x, std::size_t axis0, std::size_t axis1);
Tensor flip(const Tensor& x, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);

Tensor sum(const Tensor& x);  // all elements, scalar result
Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes,
           bool keepdims = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes,
            bool keepdims = false);

/// x: P x n (any leading axes) -> P x index.size(); out[p, j] = x[p, index[j]].
Tensor gather_last(const Tensor& x, const std::vector<std::size_t>& index);

/// Adjoint of gather_last: out[p, index[j]] += x[p, j], out last extent `n`.
Tensor scatter_add_last(const Tensor& x, const std::vector<std::size_t>& index,
                        std::size_t n);

/// Selective scan over channels-last sequences.
///   x, delta: Bt x L x K    a: N x K (negative)    b, c: Bt x L x N
/// h_i = exp(delta_i * a) . h_{i-1} + b_i^T (delta_i . x_i),  y_i = c_i h_i,
/// with h_0 = 0 and h_i an N x K state.
Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a,
                      const Tensor& b, const Tensor& c);

// Generic string-keyed entry point over the primitives above.
using AttrValue = std::variant<double, std::int64_t, std::vector<std::int64_t>>;
using Attrs = std::map<std::string, AttrValue>;

Tensor apply_primitive(std::string_view name, std::span<const Tensor> inputs,
                       const Attrs& attrs = {});
std::vector<std::string> primitive_names();

}  // namespace mambattn::ops
