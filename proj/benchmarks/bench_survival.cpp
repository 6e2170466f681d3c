#include <benchmark/benchmark.h>

#include <cmath>

#include "mait/rng.hpp"
#include "mait/survival.hpp"

namespace {

mait::SurvivalData make_survival(std::size_t n, std::size_t d, std::uint64_t seed) {
    mait::SurvivalData sd;
    sd.features = mait::Matrix(n, d);
    mait::Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) sd.features.at(r, c) = rng.normal();
        const double hazard = std::exp(0.8 * sd.features.at(r, 0));
        const double t = -std::log(rng.uniform01() + 1e-12) / hazard;
        const double censor = -std::log(rng.uniform01() + 1e-12) / 0.3;
        sd.time.push_back(std::min(t, censor));
        sd.event.push_back(t <= censor ? 1 : 0);
    }
    sd.feature_names.resize(d);
    return sd;
}

void bench_fit_rsf(benchmark::State& state) {
    const auto d = make_survival(256, 8, 11);
    for (auto _ : state) {
        auto model = mait::fit_rsf(d, static_cast<int>(state.range(0)), 10, 1);
        benchmark::DoNotOptimize(model);
    }
}
BENCHMARK(bench_fit_rsf)->Arg(50)->Arg(100);

void bench_fit_cox(benchmark::State& state) {
    const auto d = make_survival(512, 8, 11);
    for (auto _ : state) {
        auto model = mait::fit_cox_en(d, 0.01, 0.5);
        benchmark::DoNotOptimize(model);
    }
}
BENCHMARK(bench_fit_cox);

} // namespace
