// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cstring>

#include "mambattn/error.hpp"
#include "mambattn/kernels.hpp"
#include "mambattn/ops.hpp"

namespace mambattn::ops {
namespace {

using autograd::Node;

[[noreturn]] void conv_fail(std::string_view op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

// Geometry shared by conv2d and its transpose: an "image" of C x H x W is
// sampled on a grid of Gh x Gw kernel placements.
struct Geometry {
  std::size_t channels = 0, height = 0, width = 0;
  std::size_t kh = 0, kw = 0;
  std::size_t grid_h = 0, grid_w = 0;
  Conv2dOptions opts;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return grid_h * grid_w; }
};

// Grid rows [oh0, oh1) only; `col` holds (oh1 - oh0) * grid_w columns.
void im2col(const Geometry& g, const double* img, double* col, std::size_t oh0,
            std::size_t oh1) {
  const auto [sh, sw] = g.opts.stride;
  const auto [dh, dw] = g.opts.dilation;
  const std::size_t pt = g.opts.padding[0], pl = g.opts.padding[2];
  const std::size_t cols = (oh1 - oh0) * g.grid_w;
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* dst = col + ((c * g.kh + i) * g.kw + j) * cols;
        const double* plane = img + c * g.height * g.width;
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * sh + i * dh) -
                                    static_cast<std::ptrdiff_t>(pt);
          double* drow = dst + (oh - oh0) * g.grid_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(drow, drow + g.grid_w, 0.0);
            continue;
          }
          const double* srow = plane + ih * g.width;
          for (std::size_t ow = 0; ow < g.grid_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * sw + j * dw) -
                                      static_cast<std::ptrdiff_t>(pl);
            drow[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width))
                           ? 0.0
                           : srow[iw];
          }
        }
      }
}

void col2im(const Geometry& g, const double* col, double* img, std::size_t oh0,
            std::size_t oh1) {
  const auto [sh, sw] = g.opts.stride;
  const auto [dh, dw] = g.opts.dilation;
  const std::size_t pt = g.opts.padding[0], pl = g.opts.padding[2];
  const std::size_t cols = (oh1 - oh0) * g.grid_w;
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* src = col + ((c * g.kh + i) * g.kw + j) * cols;
        double* plane = img + c * g.height * g.width;
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * sh + i * dh) -
                                    static_cast<std::ptrdiff_t>(pt);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          const double* srow = src + (oh - oh0) * g.grid_w;
          double* drow = plane + ih * g.width;
          for (std::size_t ow = 0; ow < g.grid_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * sw + j * dw) -
                                      static_cast<std::ptrdiff_t>(pl);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
            drow[iw] += srow[ow];
          }
        }
      }
}

// Grid rows per chunk so a column buffer stays near 2 MB.
std::size_t chunk_rows(const Geometry& g) {
  constexpr std::size_t kBudget = std::size_t{1} << 18;
  return std::max<std::size_t>(1, kBudget / std::max<std::size_t>(1, g.rows() * g.grid_w));
}

// dst (n x rows) = columns [col0, col0 + n) of src (rows x ld), transposed.
void transpose_columns(const double* src, std::size_t rows, std::size_t ld, std::size_t col0,
                       std::size_t n, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* srow = src + r * ld + col0;
    for (std::size_t j = 0; j < n; ++j) dst[j * rows + r] = srow[j];
  }
}

// g (a x b) += t^T where t is b x a.
void add_transposed(const double* t, std::size_t a, std::size_t b, double* g) {
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j) g[i * b + j] += t[j * a + i];
}

void check_options(std::string_view op, const Conv2dOptions& opts) {
  if (opts.stride[0] == 0 || opts.stride[1] == 0) conv_fail(op, "stride must be >= 1");
  if (opts.dilation[0] == 0 || opts.dilation[1] == 0) conv_fail(op, "dilation must be >= 1");
}

void add_bias(double* out, const double* bias, std::size_t channels,
              std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    double* p = out + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
  }
}

void bias_grad(const double* g, double* gb, std::size_t channels,
               std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    const double* p = g + c * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    gb[c] += acc;
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& opts) {
  constexpr std::string_view op = "conv2d";
  check_options(op, opts);
  if (!x.defined() || x.rank() != 4) conv_fail(op, "input must be M x Cin x H x W");
  if (!weight.defined() || weight.rank() != 4) conv_fail(op, "weight must be Cout x Cin x kh x kw");
  const std::size_t m = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(0);
  if (weight.dim(1) != cin) {
    conv_fail(op, "input channels Cin=" + std::to_string(cin) +
                      " but weight expects " + std::to_string(weight.dim(1)) +
                      " (input " + to_string(x.shape()) + ", weight " +
                      to_string(weight.shape()) + ")");
  }
  if (bias.defined() && bias.numel() != cout) {
    conv_fail(op, "bias length " + std::to_string(bias.numel()) +
                      " != Cout " + std::to_string(cout));
  }
  Geometry g;
  g.channels = cin;
  g.height = h;
  g.width = w;
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.opts = opts;
  const std::size_t span_h = opts.dilation[0] * (g.kh - 1) + 1;
  const std::size_t span_w = opts.dilation[1] * (g.kw - 1) + 1;
  const std::size_t ph = h + opts.padding[0] + opts.padding[1];
  const std::size_t pw = w + opts.padding[2] + opts.padding[3];
  if (g.kh == 0 || g.kw == 0 || ph < span_h || pw < span_w) {
    conv_fail(op, "kernel " + to_string(weight.shape()) +
                      " does not fit padded input H=" + std::to_string(ph) +
                      " W=" + std::to_string(pw));
  }
  g.grid_h = (ph - span_h) / opts.stride[0] + 1;
  g.grid_w = (pw - span_w) / opts.stride[1] + 1;

  Tensor out(Shape{m, cout, g.grid_h, g.grid_w});
  const std::size_t step = chunk_rows(g);
  std::vector<double> col(g.rows() * std::min(step, g.grid_h) * g.grid_w);
  const double* wv = weight.data().data();
  for (std::size_t s = 0; s < m; ++s) {
    const double* img = x.data().data() + s * cin * h * w;
    double* o = out.data().data() + s * cout * g.cols();
    for (std::size_t oh0 = 0; oh0 < g.grid_h; oh0 += step) {
      const std::size_t oh1 = std::min(g.grid_h, oh0 + step);
      const std::size_t n = (oh1 - oh0) * g.grid_w;
      im2col(g, img, col.data(), oh0, oh1);
      kernels::gemm(cout, n, g.rows(), wv, g.rows(), col.data(), n, o + oh0 * g.grid_w,
                    g.cols(), false);
    }
    if (bias.defined()) add_bias(o, bias.data().data(), cout, g.cols());
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  if (autograd::should_record(inputs)) {
    autograd::record(op, std::move(inputs), out, [g, m, cout](Node& node) {
      Tensor& xin = node.inputs[0];
      Tensor& win = node.inputs[1];
      const bool has_bias = node.inputs.size() > 2;
      const std::size_t in_plane = g.channels * g.height * g.width;
      const std::size_t out_plane = cout * g.cols();
      const std::size_t step = chunk_rows(g);
      const std::size_t max_n = std::min(step, g.grid_h) * g.grid_w;
      const double* gy = node.output.grad().data();
      std::vector<double> col(g.rows() * max_n), gyT, wT, gwT;
      double* gw = win.requires_grad() ? win.mutable_grad().data() : nullptr;
      double* gx = xin.requires_grad() ? xin.mutable_grad().data() : nullptr;
      if (gx != nullptr) {
        wT.resize(g.rows() * cout);
        kernels::transpose(win.data().data(), cout, g.rows(), wT.data());
      }
      if (gw != nullptr) {
        gyT.resize(max_n * cout);
        gwT.assign(g.rows() * cout, 0.0);
      }
      for (std::size_t s = 0; s < m; ++s) {
        const double* gys = gy + s * out_plane;
        for (std::size_t oh0 = 0; oh0 < g.grid_h; oh0 += step) {
          const std::size_t oh1 = std::min(g.grid_h, oh0 + step);
          const std::size_t n = (oh1 - oh0) * g.grid_w;
          const std::size_t off = oh0 * g.grid_w;
          if (gw != nullptr) {
            // dW^T (rows x cout) += col (rows x n) * dY_chunk^T (n x cout)
            im2col(g, xin.data().data() + s * in_plane, col.data(), oh0, oh1);
            transpose_columns(gys, cout, g.cols(), off, n, gyT.data());
            kernels::gemm(g.rows(), cout, n, col.data(), n, gyT.data(), cout, gwT.data(), cout,
                          true);
          }
          if (gx != nullptr) {
            kernels::gemm(g.rows(), n, cout, wT.data(), cout, gys + off, g.cols(), col.data(),
                          n, false);
            col2im(g, col.data(), gx + s * in_plane, oh0, oh1);
          }
        }
        if (has_bias && node.inputs[2].requires_grad()) {
          bias_grad(gys, node.inputs[2].mutable_grad().data(), cout, g.cols());
        }
      }
      if (gw != nullptr) add_transposed(gwT.data(), cout, g.rows(), gw);
    });
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, const Conv2dOptions& opts) {
  constexpr std::string_view op = "conv_transpose2d";
  check_options(op, opts);
  if (!x.defined() || x.rank() != 4) conv_fail(op, "input must be M x Cin x H x W");
  if (!weight.defined() || weight.rank() != 4) conv_fail(op, "weight must be Cin x Cout x kh x kw");
  const std::size_t m = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (weight.dim(0) != cin) {
    conv_fail(op, "input channels Cin=" + std::to_string(cin) +
                      " but weight expects " + std::to_string(weight.dim(0)) +
                      " (input " + to_string(x.shape()) + ", weight " +
                      to_string(weight.shape()) + ")");
  }
  const std::size_t cout = weight.dim(1);
  if (bias.defined() && bias.numel() != cout) {
    conv_fail(op, "bias length " + std::to_string(bias.numel()) +
                      " != Cout " + std::to_string(cout));
  }
  if (opts.output_padding[0] >= opts.stride[0] && opts.output_padding[0] >= opts.dilation[0]) {
    conv_fail(op, "output_padding must be smaller than stride or dilation");
  }
  if (opts.output_padding[1] >= opts.stride[1] && opts.output_padding[1] >= opts.dilation[1]) {
    conv_fail(op, "output_padding must be smaller than stride or dilation");
  }
  Geometry g;
  g.channels = cout;
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.opts = opts;
  g.grid_h = h;
  g.grid_w = w;
  const long long oh = static_cast<long long>((h - 1) * opts.stride[0] +
                                              opts.dilation[0] * (g.kh - 1) +
                                              opts.output_padding[0] + 1) -
                       static_cast<long long>(opts.padding[0] + opts.padding[1]);
  const long long ow = static_cast<long long>((w - 1) * opts.stride[1] +
                                              opts.dilation[1] * (g.kw - 1) +
                                              opts.output_padding[1] + 1) -
                       static_cast<long long>(opts.padding[2] + opts.padding[3]);
  if (h == 0 || w == 0 || oh <= 0 || ow <= 0) {
    conv_fail(op, "non-positive output extent for input " + to_string(x.shape()));
  }
  g.height = static_cast<std::size_t>(oh);
  g.width = static_cast<std::size_t>(ow);

  Tensor out(Shape{m, cout, g.height, g.width});
  const std::size_t out_plane = cout * g.height * g.width;
  const std::size_t in_plane = cin * h * w;
  const std::size_t step = chunk_rows(g);
  std::vector<double> wT(g.rows() * cin);
  kernels::transpose(weight.data().data(), cin, g.rows(), wT.data());
  std::vector<double> col(g.rows() * std::min(step, g.grid_h) * g.grid_w);
  for (std::size_t s = 0; s < m; ++s) {
    double* o = out.data().data() + s * out_plane;
    for (std::size_t oh0 = 0; oh0 < g.grid_h; oh0 += step) {
      const std::size_t oh1 = std::min(g.grid_h, oh0 + step);
      const std::size_t n = (oh1 - oh0) * g.grid_w;
      kernels::gemm(g.rows(), n, cin, wT.data(), cin,
                    x.data().data() + s * in_plane + oh0 * g.grid_w, g.cols(), col.data(), n,
                    false);
      col2im(g, col.data(), o, oh0, oh1);
    }
    if (bias.defined()) add_bias(o, bias.data().data(), cout, g.height * g.width);
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  if (autograd::should_record(inputs)) {
    autograd::record(op, std::move(inputs), out,
                     [g, m, cin, in_plane, out_plane](Node& node) {
      Tensor& xin = node.inputs[0];
      Tensor& win = node.inputs[1];
      const bool has_bias = node.inputs.size() > 2;
      const double* gy = node.output.grad().data();
      const std::size_t step = chunk_rows(g);
      const std::size_t max_n = std::min(step, g.grid_h) * g.grid_w;
      std::vector<double> col(g.rows() * max_n), xT, gwT;
      double* gw = win.requires_grad() ? win.mutable_grad().data() : nullptr;
      double* gx = xin.requires_grad() ? xin.mutable_grad().data() : nullptr;
      if (gw != nullptr) {
        xT.resize(max_n * cin);
        gwT.assign(g.rows() * cin, 0.0);
      }
      for (std::size_t s = 0; s < m; ++s) {
        const double* gys = gy + s * out_plane;
        for (std::size_t oh0 = 0; oh0 < g.grid_h; oh0 += step) {
          const std::size_t oh1 = std::min(g.grid_h, oh0 + step);
          const std::size_t n = (oh1 - oh0) * g.grid_w;
          const std::size_t off = oh0 * g.grid_w;
          im2col(g, gys, col.data(), oh0, oh1);
          if (gx != nullptr) {
            kernels::gemm(cin, n, g.rows(), win.data().data(), g.rows(), col.data(), n,
                          gx + s * in_plane + off, g.cols(), true);
          }
          if (gw != nullptr) {
            // dW^T (rows x cin) += col (rows x n) * X_chunk^T (n x cin)
            transpose_columns(xin.data().data() + s * in_plane, cin, g.cols(), off, n,
                              xT.data());
            kernels::gemm(g.rows(), cin, n, col.data(), n, xT.data(), cin, gwT.data(), cin,
                          true);
          }
        }
        if (has_bias && node.inputs[2].requires_grad()) {
          bias_grad(gys, node.inputs[2].mutable_grad().data(), g.channels,
                    g.height * g.width);
        }
      }
      if (gw != nullptr) add_transposed(gwT.data(), cin, g.rows(), gw);
    });
  }
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t dilation, std::size_t pad_left,
              std::size_t pad_right) {
  if (!x.defined() || x.rank() != 3) conv_fail("conv1d", "input must be B x Cin x L");
  if (!weight.defined() || weight.rank() != 3) conv_fail("conv1d", "weight must be Cout x Cin x k");
  Conv2dOptions opts;
  opts.stride = {1, stride};
  opts.dilation = {1, dilation};
  opts.padding = {0, 0, pad_left, pad_right};
  Tensor x4 = reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2)});
  Tensor w4 = reshape(weight, {weight.dim(0), weight.dim(1), 1, weight.dim(2)});
  Tensor y = conv2d(x4, w4, bias, opts);
  return reshape(y, {y.dim(0), y.dim(1), y.dim(3)});
}

Tensor causal_depthwise_conv1d(const Tensor& x, const Tensor& weight,
                               const Tensor& bias) {
  constexpr std::string_view op = "causal_depthwise_conv1d";
  if (!x.defined() || x.rank() != 3) conv_fail(op, "input must be B x L x C");
  const std::size_t b = x.dim(0), len = x.dim(1), c = x.dim(2);
  if (!weight.defined() || weight.rank() != 2 || weight.dim(0) != c) {
    conv_fail(op, "weight must be C x k with C=" + std::to_string(c));
  }
  if (!bias.defined() || bias.numel() != c) conv_fail(op, "bias must have C entries");
  const std::size_t k = weight.dim(1);
  Tensor out(x.shape());
  const double* xv = x.data().data();
  const double* wv = weight.data().data();
  const double* bv = bias.data().data();
  double* y = out.data().data();
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t l = 0; l < len; ++l) {
      double* yl = y + (s * len + l) * c;
      std::copy(bv, bv + c, yl);
      for (std::size_t j = 0; j < k; ++j) {
        // tap j looks back k-1-j steps
        const std::size_t back = k - 1 - j;
        if (back > l) continue;
        const double* xl = xv + (s * len + l - back) * c;
        for (std::size_t ch = 0; ch < c; ++ch) yl[ch] += wv[ch * k + j] * xl[ch];
      }
    }
  if (autograd::should_record({x, weight, bias})) {
    autograd::record(op, {x, weight, bias}, out, [b, len, c, k](Node& node) {
      const double* g = node.output.grad().data();
      const double* xv = node.inputs[0].data().data();
      const double* wv = node.inputs[1].data().data();
      double* gx = node.inputs[0].requires_grad() ? node.inputs[0].mutable_grad().data() : nullptr;
      double* gw = node.inputs[1].requires_grad() ? node.inputs[1].mutable_grad().data() : nullptr;
      double* gb = node.inputs[2].requires_grad() ? node.inputs[2].mutable_grad().data() : nullptr;
      for (std::size_t s = 0; s < b; ++s)
        for (std::size_t l = 0; l < len; ++l) {
          const double* gl = g + (s * len + l) * c;
          if (gb != nullptr)
            for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += gl[ch];
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t back = k - 1 - j;
            if (back > l) continue;
            const std::size_t src = (s * len + l - back) * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
              if (gw != nullptr) gw[ch * k + j] += gl[ch] * xv[src + ch];
              if (gx != nullptr) gx[src + ch] += gl[ch] * wv[ch * k + j];
            }
          }
        }
    });
  }
  return out;
}

}  // namespace mambattn::ops
