#include <benchmark/benchmark.h>

#include "mait/model.hpp"
#include "mait/rng.hpp"

namespace {

// synthetic binary task: two gaussian blobs with a few noise features
struct Task {
    mait::Matrix x;
    std::vector<int> y;
    std::vector<double> w;
};

Task make_task(std::size_t n, std::size_t d, std::uint64_t seed) {
    Task t;
    t.x = mait::Matrix(n, d);
    t.y.resize(n);
    t.w.assign(n, 1.0);
    mait::Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        t.y[r] = r % 2 == 0 ? 1 : 0;
        for (std::size_t c = 0; c < d; ++c) {
            const double shift = c < 3 ? (t.y[r] ? 1.0 : -1.0) : 0.0;
            t.x.at(r, c) = shift + rng.normal();
        }
    }
    return t;
}

void bench_fit_hgbt(benchmark::State& state) {
    const auto task = make_task(512, 16, 7);
    auto spec = mait::default_spec(mait::Algorithm::Hgbt, 1);
    spec.hyperparameters["n_iter"] = static_cast<double>(state.range(0));
    for (auto _ : state) {
        auto model = mait::fit_classifier(spec, task.x, task.y, task.w);
        benchmark::DoNotOptimize(model);
    }
}
BENCHMARK(bench_fit_hgbt)->Arg(50)->Arg(150);

void bench_fit_random_forest(benchmark::State& state) {
    const auto task = make_task(512, 16, 7);
    auto spec = mait::default_spec(mait::Algorithm::RandomForest, 1);
    spec.hyperparameters["n_trees"] = static_cast<double>(state.range(0));
    for (auto _ : state) {
        auto model = mait::fit_classifier(spec, task.x, task.y, task.w);
        benchmark::DoNotOptimize(model);
    }
}
BENCHMARK(bench_fit_random_forest)->Arg(100)->Arg(300);

void bench_fit_logreg(benchmark::State& state) {
    const auto task = make_task(512, 16, 7);
    const auto spec = mait::default_spec(mait::Algorithm::LogRegL1, 1);
    for (auto _ : state) {
        auto model = mait::fit_classifier(spec, task.x, task.y, task.w);
        benchmark::DoNotOptimize(model);
    }
}
BENCHMARK(bench_fit_logreg);

} // namespace
