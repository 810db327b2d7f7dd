#include <benchmark/benchmark.h>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/evolution.hpp"
#include "hmhf/harmonic_map.hpp"
#include "hmhf/modulation.hpp"

using namespace hmhf;

namespace {

RadialField perturbed_bubble(std::size_t n)
{
    auto g = build_grid(kDefaultRMin, kDefaultRMax, n);
    return sample_Q(g, {2, 1.0}) + 0.3 * sample_h(g, {2, 3.0});
}

void BM_Step(benchmark::State& state, Scheme scheme)
{
    auto u = perturbed_bubble(static_cast<std::size_t>(state.range(0)));
    StepperConfig c;
    c.scheme = scheme;
    c.dt = 1e-3;
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(step(u, 2, c));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_CAPTURE(BM_Step, imex1, Scheme::IMEX1)->RangeMultiplier(2)->Range(512, 8192);
BENCHMARK_CAPTURE(BM_Step, imex2, Scheme::IMEX2)->RangeMultiplier(2)->Range(512, 8192);

void BM_Energy(benchmark::State& state)
{
    auto u = perturbed_bubble(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(energy(u, 2));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Energy)->RangeMultiplier(2)->Range(512, 8192);

void BM_FitScale(benchmark::State& state)
{
    auto u = perturbed_bubble(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(fit_scale(u, 2, std::nullopt, 1.5));
    }
}
BENCHMARK(BM_FitScale)->RangeMultiplier(2)->Range(512, 8192);

void BM_Evolve(benchmark::State& state)
{
    auto u = perturbed_bubble(2048);
    StepperConfig c;
    c.dt = 1e-3;
    SamplingPolicy sp;
    sp.interval = 0.1;
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(evolve(u, 2, 1.0, c, sp));
    }
}
BENCHMARK(BM_Evolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
