// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP message kernels on pyramid-sized maps.
#include <benchmark/benchmark.h>

#include <random>

#include "pcsc/fusion.h"
#include "pcsc/fusion_reference.h"

namespace pcsc {
namespace {

struct Inputs {
  FeatureMap src;
  FeatureMap grad_out;
  MessageParams params;
  MessageCache cache;
};

Inputs MakeInputs(int channels, int side) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Inputs in{FeatureMap(channels, side, side), FeatureMap(channels, side, side),
            MessageParams::Initialize(channels, 4, 3, 0.5), {}};
  for (auto& v : in.src.data()) v = u(rng);
  for (auto& v : in.grad_out.data()) v = u(rng);
  for (auto& v : in.params.w2) v = u(rng);
  MessageForward(in.src, in.params, &in.cache);
  return in;
}

void BM_ForwardReference(benchmark::State& state) {
  const Inputs in = MakeInputs(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::MessageForward(in.src, in.params));
  state.SetItemsProcessed(state.iterations() * in.src.size());
}

void BM_ForwardParallel(benchmark::State& state) {
  const Inputs in = MakeInputs(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(MessageForward(in.src, in.params));
  state.SetItemsProcessed(state.iterations() * in.src.size());
}

void BM_BackwardReference(benchmark::State& state) {
  const Inputs in = MakeInputs(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::MessageBackward(in.grad_out, in.cache, in.params));
  }
  state.SetItemsProcessed(state.iterations() * in.src.size());
}

void BM_BackwardParallel(benchmark::State& state) {
  const Inputs in = MakeInputs(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(MessageBackward(in.grad_out, in.cache, in.params));
  state.SetItemsProcessed(state.iterations() * in.src.size());
}

#define PCSC_SIZES ->Args({16, 32})->Args({64, 64})->Args({256, 64})->Unit(benchmark::kMicrosecond)
BENCHMARK(BM_ForwardReference) PCSC_SIZES;
BENCHMARK(BM_ForwardParallel) PCSC_SIZES;
BENCHMARK(BM_BackwardReference) PCSC_SIZES;
BENCHMARK(BM_BackwardParallel) PCSC_SIZES;
#undef PCSC_SIZES

}  // namespace
}  // namespace pcsc

BENCHMARK_MAIN();
