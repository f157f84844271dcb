// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mambattn/attention.hpp"
#include "mambattn/net.hpp"
#include "mambattn/ops.hpp"
#include "mambattn/tensor.hpp"

using namespace mambattn;

namespace {

Tensor random(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Selective scan over L steps, 64 channels, state 16.
void BM_SelectiveScan(benchmark::State& state) {
  const std::size_t len = state.range(0), k = 64, n = 16;
  Tensor x = random({1, len, k}, 1), delta = random({1, len, k}, 2, 0.001, 0.1),
         a = random({n, k}, 3, -2.0, -0.1), b = random({1, len, n}, 4), c = random({1, len, n}, 5);
  autograd::NoGrad no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::selective_scan(x, delta, a, b, c));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelectiveScan)->RangeMultiplier(2)->Range(256, 4096)->Complexity(benchmark::oN);

void BM_Attention(benchmark::State& state) {
  const std::size_t len = state.range(0);
  nn::Rng rng(6);
  attention::MhaWeights w(64, 8, true, rng);
  Tensor x = random({1, len, 64}, 7);
  autograd::NoGrad no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(attention::multi_head_attention(x, w));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Attention)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  Tensor a = random({n, n}, 8), b = random({n, n}, 9);
  autograd::NoGrad no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.counters["flops"] =
      benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// 3x3 conv at the encoder width over a one-second spectrogram.
void BM_Conv2d(benchmark::State& state) {
  Tensor x = random({1, 64, 161, 100}, 10), w = random({64, 64, 3, 3}, 11), bias = random({64}, 12);
  ops::Conv2dOptions opts;
  opts.padding = {1, 1, 1, 1};
  autograd::NoGrad no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, bias, opts));
}
BENCHMARK(BM_Conv2d)->Unit(benchmark::kMillisecond);

// One enhancement forward pass of the default model on a second of audio.
void BM_ModelForward(benchmark::State& state) {
  net::Model model(net::ModelConfig{}, 1);
  Tensor wave = random({1, 16000}, 13, -0.5, 0.5);
  autograd::NoGrad no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(wave));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
