// Copyright 2026 The tumorseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <random>

#include "tumorseg/blas_env.hpp"
#include "tumorseg/kernels.hpp"
#include "tumorseg/kernels_ref.hpp"

namespace {

using tumorseg::ConvSpec;
using tumorseg::Tensor;

Tensor random_tensor(int c, int n, int h, int w) {
  std::mt19937 gen(1);
  std::normal_distribution<float> d;
  Tensor t(c, n, h, w);
  for (auto& v : t.data) v = d(gen);
  return t;
}

std::vector<float> random_vec(std::size_t n) {
  std::mt19937 gen(2);
  std::normal_distribution<float> d;
  std::vector<float> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

// Args: channels, spatial size.
ConvSpec spec_for(const benchmark::State& s) {
  const int c = static_cast<int>(s.range(0));
  return {c, c, 3, 1, 1, 0};
}

void BM_ConvForwardReference(benchmark::State& state) {
  const ConvSpec s = spec_for(state);
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(s.in_channels, 2, hw, hw);
  const auto w = random_vec(s.weight_count());
  const auto b = random_vec(static_cast<std::size_t>(s.out_channels));
  Tensor y;
  for (auto _ : state) {
    tumorseg::reference::conv2d_forward<float>(x, w, b, s, y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_ConvForwardParallel(benchmark::State& state) {
  const ConvSpec s = spec_for(state);
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(s.in_channels, 2, hw, hw);
  const auto w = random_vec(s.weight_count());
  const auto b = random_vec(static_cast<std::size_t>(s.out_channels));
  Tensor y;
  for (auto _ : state) {
    tumorseg::kernels::conv2d_forward(x, w, b, s, y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_ConvBackwardReference(benchmark::State& state) {
  const ConvSpec s = spec_for(state);
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(s.in_channels, 2, hw, hw);
  const Tensor dy = random_tensor(s.out_channels, 2, hw, hw);
  const auto w = random_vec(s.weight_count());
  std::vector<float> dw(w.size()), db(static_cast<std::size_t>(s.out_channels));
  Tensor dx;
  for (auto _ : state) {
    tumorseg::reference::conv2d_backward<float>(x, w, dy, s, &dx, dw, db);
    benchmark::DoNotOptimize(dx.data.data());
  }
}

void BM_ConvBackwardParallel(benchmark::State& state) {
  const ConvSpec s = spec_for(state);
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(s.in_channels, 2, hw, hw);
  const Tensor dy = random_tensor(s.out_channels, 2, hw, hw);
  const auto w = random_vec(s.weight_count());
  std::vector<float> dw(w.size()), db(static_cast<std::size_t>(s.out_channels));
  Tensor dx;
  for (auto _ : state) {
    tumorseg::kernels::conv2d_backward(x, w, dy, s, &dx, dw, db);
    benchmark::DoNotOptimize(dx.data.data());
  }
}

void BM_BatchNormReference(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(c, 8, hw, hw);
  const auto g = random_vec(static_cast<std::size_t>(c));
  const auto b = random_vec(static_cast<std::size_t>(c));
  Tensor y;
  for (auto _ : state) {
    tumorseg::reference::batchnorm_train_forward<float>(x, g, b, 1e-5f, y);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_BatchNormParallel(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const Tensor x = random_tensor(c, 8, hw, hw);
  const auto g = random_vec(static_cast<std::size_t>(c));
  const auto b = random_vec(static_cast<std::size_t>(c));
  Tensor y, xhat;
  std::vector<float> mean, var, invstd;
  for (auto _ : state) {
    tumorseg::kernels::batchnorm_train_forward(x, g, b, 1e-5f, y, xhat, mean, var, invstd);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 32})->Args({64, 16})->Args({128, 8})->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForwardReference)->Apply(conv_args);
BENCHMARK(BM_ConvForwardParallel)->Apply(conv_args);
BENCHMARK(BM_ConvBackwardReference)->Apply(conv_args);
BENCHMARK(BM_ConvBackwardParallel)->Apply(conv_args);
BENCHMARK(BM_BatchNormReference)->Args({64, 32})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BatchNormParallel)->Args({64, 32})->Unit(benchmark::kMicrosecond);

}  // namespace

int main(int argc, char** argv) {
  tumorseg::reexec_with_native_blas(argc, argv);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
