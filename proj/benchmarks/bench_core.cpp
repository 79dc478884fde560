#include "wnsf/baseline.hpp"
#include "wnsf/crlb.hpp"
#include "wnsf/hoarx.hpp"
#include "wnsf/pipeline.hpp"
#include "wnsf/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace wnsf;

namespace {

StateSpaceModel armax2() {
  Matrix ak(2, 2), bk(2, 2), c(1, 2);
  ak << 0.8, 1, -0.2, 0;
  bk << 1, 0.7, 0.5, -0.5;
  c << 1, 0;
  return StateSpaceModel::from_predictor(ak, bk, c, 1, 1.0);
}

ExperimentConfig white(Index samples) {
  ExperimentConfig cfg;
  cfg.samples = samples;
  cfg.seed = 1;
  return cfg;
}

void BM_Hoarx(benchmark::State& state) {
  const auto data = simulate(armax2(), white(state.range(0)));
  const int order = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_hoarx(data, order));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Hoarx)->Args({10000, 40})->Args({10000, 80})->Args({100000, 80})->Unit(benchmark::kMillisecond);

void BM_FitMarkov(benchmark::State& state) {
  const auto data = simulate(armax2(), white(10000));
  const int order = static_cast<int>(state.range(0));
  const auto markov = estimate_hoarx(data, order);
  const auto s = CanonicalStructure::make(1, {2});
  for (auto _ : state) benchmark::DoNotOptimize(wnsf_fit_markov(markov, s));
}
BENCHMARK(BM_FitMarkov)->Arg(40)->Arg(80)->Arg(160)->Unit(benchmark::kMillisecond);

void BM_FitMimo(benchmark::State& state) {
  const auto s = CanonicalStructure::make(2, {1, 3});
  const auto m = random_canonical_system(s, 3);
  const auto data = simulate(m, white(4000));
  for (auto _ : state) benchmark::DoNotOptimize(wnsf_fit(data, 4, 50, s));
}
BENCHMARK(BM_FitMimo)->Unit(benchmark::kMillisecond);

void BM_HoKalman(benchmark::State& state) {
  const auto markov = estimate_hoarx(simulate(armax2(), white(10000)), 80);
  for (auto _ : state) benchmark::DoNotOptimize(ho_kalman(markov, 2));
}
BENCHMARK(BM_HoKalman)->Unit(benchmark::kMillisecond);

void BM_CrlbLyapunov(benchmark::State& state) {
  const auto m = armax2();
  const auto sens = armax_sensitivities(2, 1);
  ExperimentConfig cfg = white(1000);
  if (state.range(0)) {
    cfg.excitation.variance = 25.0;
    cfg.loop.kind = LoopConfig::Kind::Rational;
    cfg.loop.filter = RationalFilter{{0.63, -2.08, 2.82, -1.86, 0.5}, {1.0, -2.65, 3.11, -1.75, 0.39}};
  }
  for (auto _ : state) benchmark::DoNotOptimize(crlb(m, sens, cfg));
}
BENCHMARK(BM_CrlbLyapunov)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_CrlbFrequency(benchmark::State& state) {
  const auto poly = armax_from_canonical(armax2());
  const ExperimentConfig cfg = white(1000);
  const int grid = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(frequency_crlb_siso(poly, 1.0, cfg, grid));
}
BENCHMARK(BM_CrlbFrequency)->Arg(1 << 10)->Arg(1 << 14)->Unit(benchmark::kMicrosecond);

void BM_Lyapunov(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto m = random_system(n, 1, 1, 5);
  const Matrix q = m.K() * m.K().transpose() + m.B() * m.B().transpose();
  for (auto _ : state) benchmark::DoNotOptimize(solve_discrete_lyapunov(m.A(), q));
}
BENCHMARK(BM_Lyapunov)->Arg(10)->Arg(40)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_Simulate(benchmark::State& state) {
  const auto m = armax2();
  const auto cfg = white(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(m, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
