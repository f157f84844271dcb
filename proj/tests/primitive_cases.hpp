// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mambattn/grad_check.hpp"
#include "mambattn/ops.hpp"
#include "test_util.hpp"

// One finite-difference probe per registered primitive. The loss is
// sum(out * R) with a fixed random R so that no gradient is trivially
// uniform.
namespace mambattn::testing {

struct PrimitiveCase {
  std::string name;
  std::vector<Tensor> inputs;
  ops::Attrs attrs;
};

inline std::vector<PrimitiveCase> primitive_cases(std::uint64_t seed) {
  using L = std::vector<std::int64_t>;
  std::uint64_t s = seed * 1000;
  auto r = [&](Shape shape, double lo = -1.0, double hi = 1.0) {
    return random_tensor(std::move(shape), ++s, lo, hi);
  };
  // Values bounded away from zero, either sign.
  auto away = [&](Shape shape) {
    Tensor t = r(std::move(shape));
    for (double& v : t.data()) v = v < 0 ? v - 0.2 : v + 0.2;
    return t;
  };
  std::vector<PrimitiveCase> c;
  c.push_back({"add", {r({2, 3, 4}), r({3, 4})}, {}});
  c.push_back({"sub", {r({2, 3, 4}), r({2, 1, 4})}, {}});
  c.push_back({"mul", {r({2, 3, 4}), r({4})}, {}});
  c.push_back({"atan2", {r({2, 3}), r({2, 3}, 0.3, 1.0)}, {}});
  for (const char* n : {"exp", "sigmoid", "softplus", "silu", "tanh", "cos", "sin", "neg",
                        "square", "softmax"})
    c.push_back({n, {r({2, 3, 4})}, {}});
  c.push_back({"log", {r({2, 3}, 0.5, 2.0)}, {}});
  c.push_back({"abs", {away({2, 3})}, {}});
  c.push_back({"anti_wrap", {r({2, 5}, 0.2, 3.0)}, {}});
  c.push_back({"scale", {r({3, 2})}, {{"factor", 1.7}}});
  c.push_back({"add_scalar", {r({3, 2})}, {{"value", 0.3}}});
  c.push_back({"power", {r({2, 4}, 0.5, 2.0)}, {{"exponent", 0.3}}});
  c.push_back({"prelu", {away({2, 3, 4, 2}), r({3}, 0.1, 0.5)}, {{"axis", std::int64_t{1}}}});
  c.push_back({"layer_norm", {r({4, 8}), r({8}, 0.5, 1.5), r({8})}, {}});
  c.push_back({"instance_norm", {r({2, 3, 4, 5}), r({3}, 0.5, 1.5), r({3})}, {}});
  c.push_back({"matmul", {r({2, 3, 4}), r({4, 5})}, {}});
  c.push_back({"matmul",
               {r({2, 4, 3}), r({2, 5, 4})},
               {{"transpose_a", std::int64_t{1}}, {"transpose_b", std::int64_t{1}}}});
  c.push_back({"conv2d",
               {r({2, 2, 5, 6}), r({3, 2, 3, 3}), r({3})},
               {{"stride", L{1, 2}}, {"dilation", L{2, 1}}, {"padding", L{1, 1, 0, 1}}}});
  c.push_back({"conv_transpose2d",
               {r({1, 2, 4, 5}), r({2, 3, 3, 3}), r({3})},
               {{"stride", L{1, 2}}, {"padding", L{1, 0, 1, 1}}, {"output_padding", L{0, 1}}}});
  c.push_back({"conv1d",
               {r({2, 3, 10}), r({4, 3, 3}), r({4})},
               {{"stride", std::int64_t{2}}, {"pad_left", std::int64_t{1}},
                {"pad_right", std::int64_t{1}}}});
  c.push_back({"causal_depthwise_conv1d", {r({2, 7, 3}), r({3, 4}), r({3})}, {}});
  c.push_back({"concat", {r({2, 3}), r({2, 4})}, {{"axis", std::int64_t{1}}}});
  c.push_back({"reshape", {r({2, 3, 4})}, {{"shape", L{6, 4}}}});
  c.push_back({"permute", {r({2, 3, 4})}, {{"order", L{2, 0, 1}}}});
  c.push_back({"transpose", {r({2, 3, 4})}, {{"axis0", std::int64_t{0}}, {"axis1", std::int64_t{2}}}});
  c.push_back({"flip", {r({2, 3, 4})}, {{"axis", std::int64_t{1}}}});
  c.push_back({"slice",
               {r({2, 3, 4})},
               {{"axis", std::int64_t{2}}, {"begin", std::int64_t{1}}, {"end", std::int64_t{3}}}});
  c.push_back({"sum", {r({2, 3, 4})}, {{"axes", L{1}}}});
  c.push_back({"mean", {r({2, 3, 4})}, {{"axes", L{0, 2}}, {"keepdims", std::int64_t{1}}}});
  c.push_back({"gather_last", {r({2, 5})}, {{"index", L{4, 0, 0, 2}}}});
  c.push_back({"scatter_add_last", {r({2, 4})}, {{"index", L{1, 1, 3, 0}}, {"n", std::int64_t{5}}}});
  c.push_back({"selective_scan",
               {r({2, 6, 3}), r({2, 6, 3}, 0.1, 1.0), r({2, 3}, -1.0, -0.1), r({2, 6, 2}),
                r({2, 6, 2})},
               {}});
  return c;
}

inline GradCheckReport check_primitive(const PrimitiveCase& pc, double tolerance) {
  const Tensor probe_out = ops::apply_primitive(pc.name, pc.inputs, pc.attrs);
  const Tensor weights = random_tensor(probe_out.shape(), 77);
  std::vector<Tensor> inputs = pc.inputs;
  GradCheckOptions opts;
  opts.tolerance = tolerance;
  return grad_check_params(
      [&] { return ops::sum(ops::mul(ops::apply_primitive(pc.name, inputs, pc.attrs), weights)); },
      inputs, opts);
}

}  // namespace mambattn::testing
