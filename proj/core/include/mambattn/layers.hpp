// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mambattn/ops.hpp"
#include "mambattn/tensor.hpp"

namespace mambattn::nn {

using Rng = std::mt19937_64;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

class Module {
 public:
  virtual ~Module() = default;
  /// Calls `fn` for every parameter reachable from this module, with a
  /// dotted name. A tensor shared by two sites is visited at both.
  virtual void visit(const std::string& prefix, const ParamVisitor& fn) = 0;

  /// Parameters deduplicated by storage, in visit order.
  std::vector<NamedTensor> parameters();
  std::size_t parameter_count();
  void zero_grad();
};

std::string join(const std::string& prefix, const std::string& name);

/// Weight drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_parameter(Shape shape, std::size_t fan_in, Rng& rng);
Tensor constant_parameter(Shape shape, double value);

/// y = x W + b over the last axis. W is in x out.
class Linear : public Module {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool bias, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  Tensor weight;
  Tensor bias;  // undefined when built without bias
};

class LayerNorm : public Module {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  Tensor gamma;
  Tensor beta;
};

class Conv2d : public Module {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
         ops::Conv2dOptions opts, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  Tensor weight;  // out x in x kh x kw
  Tensor bias;
  ops::Conv2dOptions options;
};

class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                  ops::Conv2dOptions opts, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  Tensor weight;  // in x out x kh x kw
  Tensor bias;
  ops::Conv2dOptions options;
};

class InstanceNorm2d : public Module {
 public:
  InstanceNorm2d() = default;
  explicit InstanceNorm2d(std::size_t channels);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  Tensor gamma;
  Tensor beta;
};

/// One learnable slope per channel (axis 1), initialised to 0.25.
class PReLU : public Module {
 public:
  PReLU() = default;
  explicit PReLU(std::size_t channels);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  Tensor slope;
};

/// conv (or transposed conv) -> instance norm -> PReLU on M x C x T x F.
class ConvBlock : public Module {
 public:
  ConvBlock() = default;
  ConvBlock(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
            ops::Conv2dOptions opts, bool transposed, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  bool transposed = false;
  Conv2d conv;
  ConvTranspose2d deconv;
  InstanceNorm2d norm;
  PReLU act;
};

/// Dense stack of 3x3 conv blocks with time dilations 1, 2, 4, ...; layer i
/// sees the concatenation of the input and all earlier outputs (K*(i+1)
/// channels) and emits K channels. Spatial extent is preserved.
class DilatedDenseNet : public Module {
 public:
  DilatedDenseNet() = default;
  DilatedDenseNet(std::size_t channels, std::size_t depth, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn) override;

  std::vector<ConvBlock> layers;
};

}  // namespace mambattn::nn
