#include <benchmark/benchmark.h>

#include "gnnpower/fomaml.hpp"
#include "gnnpower/modular.hpp"
#include "gnnpower/netsim.hpp"
#include "gnnpower/regnn.hpp"

using namespace gnnpower;

namespace {

SimConfig bench_sim(int k) {
    SimConfig cfg;
    cfg.size_policy = SizePolicy::fixed(k);
    cfg.slots_per_period = 100;
    cfg.train_slots = 50;
    cfg.test_slots = 50;
    return cfg;
}

} // namespace

static void BM_GeneratePeriod(benchmark::State& state) {
    const SimConfig cfg = bench_sim(static_cast<int>(state.range(0)));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        const PeriodDataset d = generate_period(cfg, 0, RngStream(seed++));
        benchmark::DoNotOptimize(d.realizations.back().gains.a.data());
    }
}
BENCHMARK(BM_GeneratePeriod)->Arg(10)->Arg(20);

static void BM_ForwardBackward(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const SimConfig cfg = bench_sim(k);
    const PeriodDataset d = generate_period(cfg, 0, RngStream(1));
    RngStream rng(2);
    const ReGnnParams params = init_regnn_params(2, 4, {cfg.pmax_linear()}, rng);
    const double sigma2 = cfg.sigma2_linear();
    ForwardTrace trace;
    std::size_t slot = 0;
    for (auto _ : state) {
        const ChannelRealization& g = d.realizations[slot++ % d.realizations.size()];
        const PowerVector p = regnn_forward(params, g, &trace);
        const Vec gp = sum_rate_grad_p(g, p, sigma2);
        const ParamGrads grads = regnn_backward(params, g, trace, gp);
        benchmark::DoNotOptimize(grads.layers[0].data());
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(20);

static void BM_SoftModularForwardBackward(benchmark::State& state) {
    const int k = 10;
    const int m = static_cast<int>(state.range(0));
    const SimConfig cfg = bench_sim(k);
    const PeriodDataset d = generate_period(cfg, 0, RngStream(1));
    RngStream rng(3);
    const ModuleSet mods = init_module_set(m, 4, {cfg.pmax_linear()}, rng);
    AssignmentLogits eta = AssignmentLogits::zeros(2, m);
    const SoftAssignment soft = sample_soft(eta, gumbel_noise(2, m, rng), 1.0);
    const double sigma2 = cfg.sigma2_linear();
    ModularTrace trace;
    std::size_t slot = 0;
    for (auto _ : state) {
        const ChannelRealization& g = d.realizations[slot++ % d.realizations.size()];
        const PowerVector p = modular_forward_soft(mods, soft, g, &trace);
        const Vec gp = sum_rate_grad_p(g, p, sigma2);
        const ModularGrads grads = modular_backward_soft(mods, soft, g, trace, gp);
        benchmark::DoNotOptimize(grads.module_taps[0].data());
    }
}
BENCHMARK(BM_SoftModularForwardBackward)->Arg(2)->Arg(6);

static void BM_FomamlMetaCycle(benchmark::State& state) {
    const SimConfig cfg = bench_sim(10);
    const auto meta = generate_meta_dataset(cfg, 5, RngStream(4));
    RngStream rng(5);
    ReGnnParams phi0 = init_regnn_params(2, 4, {cfg.pmax_linear()}, rng);
    MetaConfig mc;
    mc.inner_steps = 5;
    OptimizerState outer{OptMethod::adam, mc.delta};
    const double sigma2 = cfg.sigma2_linear();
    for (auto _ : state) {
        benchmark::DoNotOptimize(fomaml_meta_step(phi0, meta, mc, outer, sigma2));
    }
}
BENCHMARK(BM_FomamlMetaCycle);

static void BM_ExhaustiveAssignment(benchmark::State& state) {
    const SimConfig cfg = bench_sim(10);
    const PeriodDataset d = generate_period(cfg, 0, RngStream(6));
    RngStream rng(7);
    const ModuleSet mods = init_module_set(static_cast<int>(state.range(0)), 4,
                                           {cfg.pmax_linear()}, rng);
    const double sigma2 = cfg.sigma2_linear();
    for (auto _ : state) {
        const auto [s, value] = exhaustive_assignment(mods, 2, d.train_batch(10), sigma2);
        benchmark::DoNotOptimize(value);
    }
}
BENCHMARK(BM_ExhaustiveAssignment)->Arg(2)->Arg(6);

BENCHMARK_MAIN();
