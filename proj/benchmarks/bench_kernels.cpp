#include <benchmark/benchmark.h>

#include <vector>

#include "safeinit/linalg.hpp"
#include "safeinit/lipschitz.hpp"
#include "safeinit/rng.hpp"

using namespace safeinit;

static void BM_SymEig(benchmark::State& state) {
  std::size_t n = state.range(0);
  Rng rng(1);
  linalg::Matrix m(n, n);
  for (auto& v : m.data()) v = rng.normal();
  linalg::SymMatrix sym = linalg::SymMatrix::from(m);
  for (auto _ : state) {
    auto d = linalg::sym_eig(sym);
    benchmark::DoNotOptimize(d.eigenvalues.data());
  }
}
BENCHMARK(BM_SymEig)->Arg(4)->Arg(16)->Arg(42)->Arg(62);

static void BM_KdeEvaluate(benchmark::State& state) {
  std::size_t n = state.range(0);
  Rng rng(2);
  std::vector<double> samples(n);
  for (auto& s : samples) s = std::abs(rng.normal()) + 0.1;
  lipschitz::KdeModel kde(samples, lipschitz::Kernel::Epanechnikov, 0.1,
                          lipschitz::SupportMode::Positive);
  double at = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kde.evaluate(at));
    at = at < 3.0 ? at + 1e-3 : 0.5;
  }
}
BENCHMARK(BM_KdeEvaluate)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_SupportEstimate(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> samples(state.range(0));
  for (auto& s : samples) s = std::abs(rng.normal()) + 0.1;
  lipschitz::KdeModel kde(samples, lipschitz::Kernel::Epanechnikov, 0.1,
                          lipschitz::SupportMode::Positive);
  for (auto _ : state) {
    auto se = lipschitz::estimate_support(kde, 0.01);
    benchmark::DoNotOptimize(se.L_hat);
  }
}
BENCHMARK(BM_SupportEstimate)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
