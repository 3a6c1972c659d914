#include <benchmark/benchmark.h>

#include "hal/lasso.hpp"
#include "hal/sim.hpp"
#include "hal/targets.hpp"

namespace {

hal::Dataset bench_data(int n) { return hal::dgp_ate(n, 7); }

void BM_enumerate_basis(benchmark::State& state) {
  const hal::Dataset data = bench_data(static_cast<int>(state.range(0)));
  hal::EnumerationCaps caps{2, 100};
  for (auto _ : state) {
    auto dict = hal::enumerate_basis(data, 0, caps);
    benchmark::DoNotOptimize(dict);
  }
}
BENCHMARK(BM_enumerate_basis)->Arg(250)->Arg(1000);

void BM_design_matrix(benchmark::State& state) {
  const hal::Dataset data = bench_data(static_cast<int>(state.range(0)));
  const auto dict = hal::enumerate_basis(data, 0, hal::EnumerationCaps{2, 100});
  for (auto _ : state) {
    auto design = hal::design_matrix(data, dict);
    benchmark::DoNotOptimize(design);
  }
}
BENCHMARK(BM_design_matrix)->Arg(250)->Arg(1000);

void BM_lasso_path(benchmark::State& state) {
  const hal::Dataset data = bench_data(static_cast<int>(state.range(0)));
  const auto dict = hal::enumerate_basis(data, 0, hal::EnumerationCaps{2, 100});
  const auto design = hal::design_matrix(data, dict);
  hal::LossKind loss;
  loss.weights = *data.a;
  const double lmax = hal::lambda_max(design, data, loss);
  const auto grid = hal::default_lambda_grid(lmax, 60);
  for (auto _ : state) {
    auto path = hal::lasso_path(design, data, loss, grid);
    benchmark::DoNotOptimize(path);
  }
}
BENCHMARK(BM_lasso_path)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_fit_ate(benchmark::State& state) {
  const hal::Dataset data = bench_data(static_cast<int>(state.range(0)));
  hal::AteConfig cfg;
  cfg.cv.folds = 5;
  cfg.cv.grid_size = 60;
  cfg.caps = {2, 100};
  for (auto _ : state) {
    auto est = hal::fit_ate(data, cfg);
    benchmark::DoNotOptimize(est);
  }
}
BENCHMARK(BM_fit_ate)->Arg(250)->Unit(benchmark::kMillisecond);

void BM_fit_density(benchmark::State& state) {
  const auto o = hal::dgp_density(static_cast<int>(state.range(0)), 7);
  hal::DensityConfig cfg;
  cfg.cv.folds = 5;
  cfg.cv.grid_size = 60;
  for (auto _ : state) {
    auto res = hal::fit_density_hal(o, 80, cfg);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_fit_density)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
