// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <array>
#include <functional>
#include <unordered_map>

#include "mambattn/error.hpp"
#include "mambattn/ops.hpp"

namespace mambattn::ops {
namespace {

using Fn = std::function<Tensor(std::span<const Tensor>, const Attrs&)>;

const AttrValue& find_attr(const Attrs& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw ShapeError("missing attribute '" + key + "'");
  return it->second;
}

double real_attr(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = find_attr(attrs, key);
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw ShapeError("attribute '" + key + "' must be a number");
}

double real_attr_or(const Attrs& attrs, const std::string& key, double fallback) {
  return attrs.count(key) ? real_attr(attrs, key) : fallback;
}

std::size_t index_attr(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = find_attr(attrs, key);
  if (auto* i = std::get_if<std::int64_t>(&v); i && *i >= 0) {
    return static_cast<std::size_t>(*i);
  }
  throw ShapeError("attribute '" + key + "' must be a nonnegative integer");
}

std::size_t index_attr_or(const Attrs& attrs, const std::string& key,
                          std::size_t fallback) {
  return attrs.count(key) ? index_attr(attrs, key) : fallback;
}

std::vector<std::size_t> list_attr(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = find_attr(attrs, key);
  const auto* list = std::get_if<std::vector<std::int64_t>>(&v);
  if (list == nullptr) throw ShapeError("attribute '" + key + "' must be a list");
  std::vector<std::size_t> out;
  for (std::int64_t e : *list) {
    if (e < 0) throw ShapeError("attribute '" + key + "' has a negative entry");
    out.push_back(static_cast<std::size_t>(e));
  }
  return out;
}

template <std::size_t N>
std::array<std::size_t, N> fixed_list(const Attrs& attrs, const std::string& key,
                                      std::array<std::size_t, N> fallback) {
  if (!attrs.count(key)) return fallback;
  auto v = list_attr(attrs, key);
  if (v.size() != N) {
    throw ShapeError("attribute '" + key + "' needs " + std::to_string(N) + " entries");
  }
  std::array<std::size_t, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

void arity(std::string_view name, std::span<const Tensor> in, std::size_t lo,
           std::size_t hi) {
  if (in.size() < lo || in.size() > hi) {
    throw ShapeError(std::string(name) + ": expected " + std::to_string(lo) +
                     (lo == hi ? "" : ".." + std::to_string(hi)) +
                     " inputs, got " + std::to_string(in.size()));
  }
}

Conv2dOptions conv_options(const Attrs& attrs) {
  Conv2dOptions o;
  o.stride = fixed_list<2>(attrs, "stride", o.stride);
  o.dilation = fixed_list<2>(attrs, "dilation", o.dilation);
  o.padding = fixed_list<4>(attrs, "padding", o.padding);
  o.output_padding = fixed_list<2>(attrs, "output_padding", o.output_padding);
  return o;
}

template <Tensor (*F)(const Tensor&)>
Fn unary_entry(std::string_view name) {
  return [name](std::span<const Tensor> in, const Attrs&) {
    arity(name, in, 1, 1);
    return F(in[0]);
  };
}

template <Tensor (*F)(const Tensor&, const Tensor&)>
Fn binary_entry(std::string_view name) {
  return [name](std::span<const Tensor> in, const Attrs&) {
    arity(name, in, 2, 2);
    return F(in[0], in[1]);
  };
}

const std::unordered_map<std::string, Fn>& registry() {
  static const std::unordered_map<std::string, Fn> table = [] {
    std::unordered_map<std::string, Fn> t;
    t["add"] = binary_entry<&add>("add");
    t["sub"] = binary_entry<&sub>("sub");
    t["mul"] = binary_entry<&mul>("mul");
    t["atan2"] = binary_entry<&atan2>("atan2");
    t["exp"] = unary_entry<&exp>("exp");
    t["log"] = unary_entry<&log>("log");
    t["sigmoid"] = unary_entry<&sigmoid>("sigmoid");
    t["softplus"] = unary_entry<&softplus>("softplus");
    t["silu"] = unary_entry<&silu>("silu");
    t["tanh"] = unary_entry<&tanh>("tanh");
    t["abs"] = unary_entry<&abs>("abs");
    t["square"] = unary_entry<&square>("square");
    t["cos"] = unary_entry<&cos>("cos");
    t["sin"] = unary_entry<&sin>("sin");
    t["neg"] = unary_entry<&neg>("neg");
    t["anti_wrap"] = unary_entry<&anti_wrap>("anti_wrap");
    t["softmax"] = unary_entry<&softmax>("softmax");
    t["scale"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("scale", in, 1, 1);
      return scale(in[0], real_attr(a, "factor"));
    };
    t["add_scalar"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("add_scalar", in, 1, 1);
      return add_scalar(in[0], real_attr(a, "value"));
    };
    t["power"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("power", in, 1, 1);
      return power(in[0], real_attr(a, "exponent"));
    };
    t["prelu"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("prelu", in, 2, 2);
      return prelu(in[0], in[1], index_attr_or(a, "axis", 1));
    };
    t["layer_norm"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("layer_norm", in, 3, 3);
      return layer_norm(in[0], in[1], in[2], real_attr_or(a, "eps", kNormEpsilon));
    };
    t["instance_norm"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("instance_norm", in, 3, 3);
      return instance_norm(in[0], in[1], in[2], real_attr_or(a, "eps", kNormEpsilon));
    };
    t["matmul"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("matmul", in, 2, 2);
      return matmul(in[0], in[1], index_attr_or(a, "transpose_a", 0) != 0,
                    index_attr_or(a, "transpose_b", 0) != 0);
    };
    t["conv2d"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("conv2d", in, 2, 3);
      return conv2d(in[0], in[1], in.size() > 2 ? in[2] : Tensor(), conv_options(a));
    };
    t["conv_transpose2d"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("conv_transpose2d", in, 2, 3);
      return conv_transpose2d(in[0], in[1], in.size() > 2 ? in[2] : Tensor(),
                              conv_options(a));
    };
    t["conv1d"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("conv1d", in, 2, 3);
      return conv1d(in[0], in[1], in.size() > 2 ? in[2] : Tensor(),
                    index_attr_or(a, "stride", 1), index_attr_or(a, "dilation", 1),
                    index_attr_or(a, "pad_left", 0), index_attr_or(a, "pad_right", 0));
    };
    t["causal_depthwise_conv1d"] = [](std::span<const Tensor> in, const Attrs&) {
      arity("causal_depthwise_conv1d", in, 3, 3);
      return causal_depthwise_conv1d(in[0], in[1], in[2]);
    };
    t["concat"] = [](std::span<const Tensor> in, const Attrs& a) {
      return concat(in, index_attr(a, "axis"));
    };
    t["reshape"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("reshape", in, 1, 1);
      return reshape(in[0], list_attr(a, "shape"));
    };
    t["permute"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("permute", in, 1, 1);
      return permute(in[0], list_attr(a, "order"));
    };
    t["transpose"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("transpose", in, 1, 1);
      return transpose(in[0], index_attr(a, "axis0"), index_attr(a, "axis1"));
    };
    t["flip"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("flip", in, 1, 1);
      return flip(in[0], index_attr(a, "axis"));
    };
    t["slice"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("slice", in, 1, 1);
      return slice(in[0], index_attr(a, "axis"), index_attr(a, "begin"),
                   index_attr(a, "end"));
    };
    t["sum"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("sum", in, 1, 1);
      if (!a.count("axes")) return sum(in[0]);
      return sum(in[0], list_attr(a, "axes"), index_attr_or(a, "keepdims", 0) != 0);
    };
    t["mean"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("mean", in, 1, 1);
      if (!a.count("axes")) return mean(in[0]);
      return mean(in[0], list_attr(a, "axes"), index_attr_or(a, "keepdims", 0) != 0);
    };
    t["gather_last"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("gather_last", in, 1, 1);
      return gather_last(in[0], list_attr(a, "index"));
    };
    t["scatter_add_last"] = [](std::span<const Tensor> in, const Attrs& a) {
      arity("scatter_add_last", in, 1, 1);
      return scatter_add_last(in[0], list_attr(a, "index"), index_attr(a, "n"));
    };
    t["selective_scan"] = [](std::span<const Tensor> in, const Attrs&) {
      arity("selective_scan", in, 5, 5);
      return selective_scan(in[0], in[1], in[2], in[3], in[4]);
    };
    return t;
  }();
  return table;
}

}  // namespace

Tensor apply_primitive(std::string_view name, std::span<const Tensor> inputs,
                       const Attrs& attrs) {
  const auto& table = registry();
  auto it = table.find(std::string(name));
  if (it == table.end()) {
    throw ShapeError("unknown primitive '" + std::string(name) + "'");
  }
  return it->second(inputs, attrs);
}

std::vector<std::string> primitive_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace mambattn::ops
