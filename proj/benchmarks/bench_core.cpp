#include <benchmark/benchmark.h>

#include "timeloop/timeloop.hpp"

using namespace timeloop;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

void BM_ExpMapWarped(benchmark::State& state) {
  const SpacetimeModel m = warped_cylinder();
  const TangentVec v{v2(0, 0.4), v2(1.05, 0.1)};
  for (auto _ : state) benchmark::DoNotOptimize(exp_map(m, v, 1e-12));
}
BENCHMARK(BM_ExpMapWarped);

void BM_ExpMapAds(benchmark::State& state) {
  const SpacetimeModel m = ads2();
  const TangentVec v{v2(0, 0), v2(6.283185307179586, 0.0)};
  for (auto _ : state) benchmark::DoNotOptimize(exp_map(m, v, 1e-12));
}
BENCHMARK(BM_ExpMapAds);

void BM_FindLoopWarped(benchmark::State& state) {
  const SpacetimeModel m = warped_cylinder();
  for (auto _ : state) benchmark::DoNotOptimize(find_loop(m, {v2(0, 0.4), v2(1.05, 0.1)}, "T"));
}
BENCHMARK(BM_FindLoopWarped);

void BM_ConjugatePointsAds(benchmark::State& state) {
  const SpacetimeModel m = ads2();
  const GeodesicSegment seg = integrate_geodesic(m, {v2(0, 0), v2(1, 0)}, 6.283185307179586, 1e-12);
  for (auto _ : state) benchmark::DoNotOptimize(conjugate_points(m, seg));
}
BENCHMARK(BM_ConjugatePointsAds);

void BM_HillStepWarped(benchmark::State& state) {
  const SpacetimeModel m = warped_cylinder();
  const LoopCandidate loop = find_loop(m, {v2(0, 0.4), v2(1.05, 0.1)}, "T");
  for (auto _ : state) benchmark::DoNotOptimize(hill_step(m, loop, 0.02, ClimbDirection::shorten));
}
BENCHMARK(BM_HillStepWarped);

}  // namespace
BENCHMARK_MAIN();
