#include <benchmark/benchmark.h>

#include "microorch/workloads.hpp"

namespace {

using namespace microorch;

Signal make_input(std::size_t n) {
  return normalize_signal(generate_signal(SignalSpec::seeded_uniform(7), n)).signal;
}

void BM_FftFloat(benchmark::State& state) {
  Signal input = make_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fft_float(input));
  }
  state.SetComplexityN(state.range(0));
}

void BM_FftFixedQ115(benchmark::State& state) {
  Signal input = make_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fft_fixed(input));
  }
  state.SetComplexityN(state.range(0));
}

void BM_DftNaive(benchmark::State& state) {
  Signal input = make_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dft_naive(input));
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_FftFloat)->RangeMultiplier(4)->Range(8, 4096)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_FftFixedQ115)->RangeMultiplier(4)->Range(8, 4096)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_DftNaive)->RangeMultiplier(4)->Range(8, 1024)->Complexity(benchmark::oNSquared);

BENCHMARK_MAIN();
