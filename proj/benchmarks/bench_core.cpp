// Hot-path benchmarks: path generation, the two likelihood routes, and a
// full penalized fit. Run via the driftlasso_bench target; numbers are for
// eyeballing regressions, nothing asserts on them.

#include <benchmark/benchmark.h>

#include <memory>

#include "driftlasso/experiments.hpp"

namespace dl = driftlasso;

namespace {

dl::ObservedPath make_path(int d, double T, std::uint64_t seed) {
  dl::GeneratedMatrix gen = dl::generate_sparse_stable_matrix(d, 0.5, 0.5, 1.5, 0.05, 200, seed);
  dl::OrnsteinUhlenbeck model(d);
  dl::SimConfig cfg;
  cfg.T = T;
  cfg.steps_per_unit = 100;
  cfg.seed = seed + 1;
  return dl::simulate(model, dl::vec_param(gen.A), cfg);
}

void BM_simulate(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  dl::GeneratedMatrix gen = dl::generate_sparse_stable_matrix(d, 0.5, 0.5, 1.5, 0.05, 200, 5);
  dl::OrnsteinUhlenbeck model(d);
  dl::SimConfig cfg;
  cfg.T = 10.0;
  cfg.steps_per_unit = 100;
  for (auto _ : state) {
    cfg.seed += 1;
    benchmark::DoNotOptimize(dl::simulate(model, dl::vec_param(gen.A), cfg));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_simulate)->Arg(2)->Arg(10);

void BM_nll_cached(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  dl::ObservedPath path = make_path(d, 10.0, 21);
  dl::OrnsteinUhlenbeck model(d);
  dl::LikelihoodEvaluator ev(model, path);
  dl::Vector theta = dl::Vector::Constant(d * d, 0.3);
  dl::Vector grad(d * d);
  for (auto _ : state) benchmark::DoNotOptimize(ev.nll_value_and_gradient(theta, grad));
}
BENCHMARK(BM_nll_cached)->Arg(5)->Arg(10);

void BM_nll_direct(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  dl::ObservedPath path = make_path(d, 10.0, 22);
  dl::OrnsteinUhlenbeck model(d);
  dl::LikelihoodEvaluator ev(model, path, /*build_cache=*/false);
  dl::Vector theta = dl::Vector::Constant(d * d, 0.3);
  dl::Vector grad(d * d);
  for (auto _ : state) benchmark::DoNotOptimize(ev.nll_value_and_gradient(theta, grad));
}
BENCHMARK(BM_nll_direct)->Arg(5)->Arg(10);

void BM_nll_direct_sine(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  dl::SineQuadratic model(d);
  dl::Vector theta = dl::Vector::Constant(d * d, 0.4);
  dl::SimConfig cfg;
  cfg.T = 10.0;
  cfg.steps_per_unit = 100;
  cfg.seed = 23;
  dl::ObservedPath path = dl::simulate(model, theta, cfg);
  dl::LikelihoodEvaluator ev(model, path);
  dl::Vector grad(d * d);
  for (auto _ : state) benchmark::DoNotOptimize(ev.nll_value_and_gradient(theta, grad));
}
BENCHMARK(BM_nll_direct_sine)->Arg(5)->Arg(10);

void BM_fit_lasso(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  dl::ObservedPath path = make_path(d, 10.0, 24);
  dl::OrnsteinUhlenbeck model(d);
  dl::LikelihoodEvaluator ev(model, path);
  const double lambda = 0.3 * dl::lambda_max(ev);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dl::fit_lasso(ev, lambda, dl::SolverConfig{}, dl::Vector::Zero(d * d)));
  }
}
BENCHMARK(BM_fit_lasso)->Arg(5)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
