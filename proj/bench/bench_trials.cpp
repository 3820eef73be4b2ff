#include "lidx/experiments.hpp"
#include "lidx/trials.hpp"

#include <benchmark/benchmark.h>

using namespace lidx;

namespace {

// jobs == 1 takes the serial reference path.
void BM_PlaOptimality(benchmark::State &state) {
    const int jobs = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(exp::pla_optimality(200, 128, 1, jobs).mismatches);
}
BENCHMARK(BM_PlaOptimality)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_PgmLeakage(benchmark::State &state) {
    exp::PgmLeakageConfig cfg;
    cfg.n = 20000;
    cfg.epsilon = 32;
    cfg.calibration = 8;
    cfg.test = 16;
    const int jobs = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(exp::pgm_leakage(cfg, jobs).correct);
}
BENCHMARK(BM_PgmLeakage)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_BanditCampaign(benchmark::State &state) {
    bandit::CampaignConfig cfg;
    cfg.targets = 8;
    cfg.trainings = 10;
    cfg.universe = 500;
    const int jobs = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(exp::bandit_campaign(cfg, jobs).mean_tv);
}
BENCHMARK(BM_BanditCampaign)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
