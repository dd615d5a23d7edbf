#include <benchmark/benchmark.h>

#include <memory>
#include <numeric>
#include <vector>

#include "deann/ann.hpp"
#include "deann/estimators.hpp"
#include "deann/synth.hpp"

namespace {

constexpr std::size_t kN = 50000, kD = 32, kQueries = 64;

struct Fixture {
  deann::Dataset train;
  deann::Dataset queries;
  deann::KernelSpec kernel{deann::KernelFamily::Exponential, 1.0};
  std::shared_ptr<const deann::PermutedDataset> permuted;
  deann::IvfIndex ivf;

  static const Fixture& get() {
    static const Fixture f = make();
    return f;
  }

 private:
  static Fixture make() {
    const deann::Dataset all = deann::gaussian_mixture(kN + kQueries, kD, {50, 10.0, 1.0}, 3);
    std::vector<std::size_t> idx(kN);
    std::iota(idx.begin(), idx.end(), 0);
    deann::Dataset train = all.select(idx);
    idx.resize(kQueries);
    std::iota(idx.begin(), idx.end(), kN);
    deann::Dataset queries = all.select(idx);
    auto permuted = std::make_shared<const deann::PermutedDataset>(deann::permute(train, 4));
    deann::IvfIndex ivf = deann::IvfIndex::build(train, 128, 5);
    return {std::move(train), std::move(queries), {deann::KernelFamily::Exponential, 1.0},
            std::move(permuted), std::move(ivf)};
  }
};

void BM_Naive(benchmark::State& state) {
  const Fixture& f = Fixture::get();
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deann::naive_kde(f.train, f.kernel, f.queries.row(q)));
    q = (q + 1) % kQueries;
  }
}
BENCHMARK(BM_Naive);

void BM_NaiveBatch(benchmark::State& state) {
  const Fixture& f = Fixture::get();
  for (auto _ : state) benchmark::DoNotOptimize(deann::naive_kde(f.train, f.kernel, f.queries));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kQueries));
}
BENCHMARK(BM_NaiveBatch);

void BM_Rs(benchmark::State& state) {
  const Fixture& f = Fixture::get();
  const auto m = static_cast<std::size_t>(state.range(0));
  deann::Rng rng(6);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deann::rs_kde(f.train, f.kernel, f.queries.row(q), m, rng));
    q = (q + 1) % kQueries;
  }
}
BENCHMARK(BM_Rs)->Arg(1000)->Arg(10000);

void BM_Rsp(benchmark::State& state) {
  const Fixture& f = Fixture::get();
  const auto m = static_cast<std::size_t>(state.range(0));
  deann::RspState rsp(f.permuted);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deann::rsp_kde(rsp, f.kernel, f.queries.row(q), m));
    q = (q + 1) % kQueries;
  }
}
BENCHMARK(BM_Rsp)->Arg(1000)->Arg(10000);

void BM_Deannp(benchmark::State& state) {
  const Fixture& f = Fixture::get();
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const deann::IvfAnn ann(f.ivf, 1);
  deann::RspState rsp(f.permuted);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deann::deann(f.train, f.kernel, &ann, f.queries.row(q), k, m, rsp));
    q = (q + 1) % kQueries;
  }
}
BENCHMARK(BM_Deannp)->Args({10, 100})->Args({100, 1000})->Args({400, 100});

void BM_IvfQuery(benchmark::State& state) {
  const Fixture& f = Fixture::get();
  const auto n_probe = static_cast<std::size_t>(state.range(0));
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.ivf.query(f.queries.row(q), 100, n_probe));
    q = (q + 1) % kQueries;
  }
}
BENCHMARK(BM_IvfQuery)->Arg(1)->Arg(4)->Arg(16);

}  // namespace
