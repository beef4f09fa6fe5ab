// Serial reference vs OpenMP kernel for the approximate log-likelihood, plus
// a small Monte Carlo cell.  Run with OMP_NUM_THREADS set to compare.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "eivbeta/likelihood.hpp"
#include "eivbeta/quadrature.hpp"
#include "eivbeta/simulate.hpp"

namespace {

using namespace eivbeta;

struct Fixture {
  SimDesign design;
  Dataset data;
  explicit Fixture(int n) : design(SimDesign::standard(true, 0.75, n)), data(simulate_dataset(design, 0)) {}
};

void BM_loglik_serial(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const auto& rule = hermite_rule(50);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        serial::loglik_approx(f.data, f.design.theta_true, f.design.delta_true, f.design.meas, rule, f.design.spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_loglik_openmp(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const auto& rule = hermite_rule(50);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        loglik_approx(f.data, f.design.theta_true, f.design.delta_true, f.design.meas, rule, f.design.spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_monte_carlo(benchmark::State& state) {
  SimDesign d = SimDesign::standard(false, 0.75, 100);
  d.n_reps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(d, {Method::naive, Method::mpl}));
  state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_loglik_serial)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_loglik_openmp)->Arg(100)->Arg(1000)->Arg(10000);
BENCHMARK(BM_monte_carlo)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
