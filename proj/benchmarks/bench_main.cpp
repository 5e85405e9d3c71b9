#include <benchmark/benchmark.h>

#include "fibermc/mc.hpp"
#include "fibermc/mh.hpp"
#include "fibermc/optics.hpp"
#include "fibermc/ray.hpp"
#include "fibermc/random.hpp"

using namespace fibermc;

namespace {

Scenario tumor() { return Scenario{OpticalParams(73.0, 1.39, 0.9), SourceSpec{}, VoxelGrid(0.04, 25)}; }

void BM_HgCosine(benchmark::State& state) {
  RandomStream rs(1);
  double acc = 0.0;
  for (auto _ : state) acc += sample_hg_cosine(rs.uniform(), 0.9);
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HgCosine);

void BM_FrameTransport(benchmark::State& state) {
  RandomStream rs(2);
  Direction d{0.0, 0.0, -1.0};
  for (auto _ : state) {
    d = frame_transport(d, sample_hg_cosine(rs.uniform(), 0.9), 6.283185307179586 * rs.uniform());
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FrameTransport);

void BM_SampleRay(benchmark::State& state) {
  const OpticalParams p(73.0, 1.39, 0.9);
  RandomStream rs(3);
  std::size_t segments = 0;
  for (auto _ : state) segments += sample_ray(rs, p, SourceSpec{}).lengths.size();
  state.counters["segments/ray"] = benchmark::Counter(static_cast<double>(segments) / state.iterations());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SampleRay);

void BM_EstimateMc(benchmark::State& state) {
  const Scenario s = tumor();
  const auto rays = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_mc(s, rays, RandomStream(4)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimateMc)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_EstimateMcSome(benchmark::State& state) {
  const Scenario s = tumor();
  const McSomeSettings set{static_cast<std::uint64_t>(state.range(0)), 40, 30};
  for (auto _ : state) benchmark::DoNotOptimize(estimate_mc_some(s, set, RandomStream(5)));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 40 * 30);
}
BENCHMARK(BM_EstimateMcSome)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_MhStep(benchmark::State& state) {
  const OpticalParams p(73.0, 1.39, 0.9);
  RandomStream rs(6);
  MhChain chain(p, MhParams{}, make_chain_state(sample_ray(rs, p, SourceSpec{}), p));
  for (auto _ : state) benchmark::DoNotOptimize(chain.step(rs));
  state.counters["acceptance"] = benchmark::Counter(static_cast<double>(chain.accepted()) / chain.steps());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MhStep);

}  // namespace

BENCHMARK_MAIN();
