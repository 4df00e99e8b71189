// OpenMP kernels against their serial reference paths.

#include <benchmark/benchmark.h>

#include "keyrate/dms.hpp"
#include "keyrate/extremal.hpp"
#include "keyrate/musolver.hpp"
#include "test_util.hpp"

using namespace keyrate;

namespace {

SourceModel bench_model(int p) {
  Rng rng(static_cast<std::uint64_t>(100 + p));
  return keyrate::testing::random_model(p, rng);
}

const MuWeights kWeights(0.5, 0.3, 0.2);

void BM_solve(benchmark::State& state, Execution ex) {
  const SourceModel m = bench_model(static_cast<int>(state.range(0)));
  SolverOptions o;
  o.starts = 16;
  for (auto _ : state) {
    const SolveResult r = ex == Execution::serial ? solve_mu_sum_serial(m, kWeights, o) : solve_mu_sum(m, kWeights, o);
    benchmark::DoNotOptimize(r.value);
  }
}

void BM_scan(benchmark::State& state, Execution ex) {
  const SourceModel m = bench_model(static_cast<int>(state.range(0)));
  SolverOptions o;
  o.grad_tol = 1e-11;
  const SolveResult r = solve_mu_sum(m, kWeights, o);
  for (auto _ : state) benchmark::DoNotOptimize(scan_gaussian(m, r, 2000, 1, ex).min_gap);
  state.SetItemsProcessed(state.iterations() * 2000);
}

void BM_costa(benchmark::State& state, Execution ex) {
  const int p = static_cast<int>(state.range(0));
  Rng rng(7);
  const SymMatrix n1 = random_spd(p, 0.1, 3.0, rng);
  const SymMatrix n2 = n1 + random_spd(p, 0.0, 3.0, rng);
  const SymMatrix bstar = random_spd(p, 0.1, 3.0, rng);
  const SymMatrix n3 = costa_n3(n1, n2, 1.5, bstar);
  for (auto _ : state) benchmark::DoNotOptimize(check_costa_lemma(n1, n2, n3, 1.5, bstar, 2000, 1, ex).min_gap);
  state.SetItemsProcessed(state.iterations() * 2000);
}

void BM_inner_region(benchmark::State& state, Execution ex) {
  const DiscreteSource src = binary_symmetric_source(0.1, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(inner_region(src, 3, 2, state.range(0), 1, ex).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_solve, serial, Execution::serial)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_solve, parallel, Execution::parallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_scan, serial, Execution::serial)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_scan, parallel, Execution::parallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_costa, serial, Execution::serial)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_costa, parallel, Execution::parallel)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_inner_region, serial, Execution::serial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_inner_region, parallel, Execution::parallel)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
