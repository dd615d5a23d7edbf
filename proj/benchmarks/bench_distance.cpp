#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "deann/dataset.hpp"
#include "deann/distance.hpp"
#include "deann/rng.hpp"

namespace {

deann::Dataset random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  deann::Rng rng(seed);
  std::vector<float> v(n * d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return deann::Dataset(n, d, std::move(v));
}

// Full query x data distance matrix through the blocked GEMM path.
void BM_BatchSqdist(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const deann::Dataset data = random_rows(n, d, 1);
  const deann::Dataset queries = random_rows(64, d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(deann::batch_sqdist(queries, data));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64));
}
BENCHMARK(BM_BatchSqdist)->Args({10000, 16})->Args({10000, 64})->Args({10000, 256});

// The same matrix one pair at a time.
void BM_PairwiseSqdist(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const deann::Dataset data = random_rows(n, d, 1);
  const deann::Dataset queries = random_rows(64, d, 2);
  std::vector<double> out(n * 64);
  for (auto _ : state) {
    for (std::size_t q = 0; q < 64; ++q)
      for (std::size_t i = 0; i < n; ++i) out[q * n + i] = deann::sqdist(queries.row(q), data.row(i));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64));
}
BENCHMARK(BM_PairwiseSqdist)->Args({10000, 16})->Args({10000, 64})->Args({10000, 256});

}  // namespace
