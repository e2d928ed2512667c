// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "proptree/kernels.hpp"

namespace kernels = proptree::kernels;

namespace {

std::vector<double> noise(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n), b = noise(n * n);
  std::vector<double> c(n * n);
  const kernels::GemmArgs args{a, b, c, n, n, n};
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::gemm(args);
    } else {
      kernels::serial::gemm(args);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

// A document of n positions with a 32-wide scorer: the pairwise sum that
// feeds the head selector.
template <bool Parallel>
void pair_add(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t width = 4 * 32;
  const auto a = noise(n * width), b = noise(n * width);
  std::vector<double> out(n * n * width);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::pair_add(a, b, out, n, n, width);
    } else {
      kernels::serial::pair_add(a, b, out, n, n, width);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * width));
}

// The third-order contraction of the tensor-network attention with d=256, l=32.
template <bool Parallel>
void pair_contract(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 256, k = 32;
  const auto proj = noise(n * k * d), h = noise(n * d);
  std::vector<double> out(n * n * k);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::pair_contract(proj, h, out, n, d, k);
    } else {
      kernels::serial::pair_contract(proj, h, out, n, d, k);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * k * d));
}

}  // namespace

BENCHMARK(gemm<false>)->Name("gemm/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(gemm<true>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(pair_add<false>)->Name("pair_add/serial")->Arg(40)->Arg(120);
BENCHMARK(pair_add<true>)->Name("pair_add/parallel")->Arg(40)->Arg(120);
BENCHMARK(pair_contract<false>)->Name("pair_contract/serial")->Arg(40)->Arg(120);
BENCHMARK(pair_contract<true>)->Name("pair_contract/parallel")->Arg(40)->Arg(120);

BENCHMARK_MAIN();
