#include <benchmark/benchmark.h>

#include "mait/explain.hpp"
#include "mait/model.hpp"
#include "mait/rng.hpp"

namespace {

mait::Matrix make_x(std::size_t n, std::size_t d, std::uint64_t seed) {
    mait::Matrix x(n, d);
    mait::Rng rng(seed);
    for (double& v : x.data) v = rng.normal();
    return x;
}

void bench_tree_shap(benchmark::State& state) {
    const std::size_t d = 12;
    const auto x = make_x(256, d, 3);
    std::vector<int> y(x.rows);
    std::vector<double> w(x.rows, 1.0);
    mait::Rng rng(5);
    for (std::size_t r = 0; r < x.rows; ++r) y[r] = x.at(r, 0) + x.at(r, 1) > 0 ? 1 : 0;
    auto spec = mait::default_spec(mait::Algorithm::Hgbt, 1);
    spec.hyperparameters["n_iter"] = static_cast<double>(state.range(0));
    const auto model = [&] {
        auto m = mait::fit_classifier(spec, x, y, w);
        m.feature_names.resize(d);
        return m;
    }();
    const auto probe = make_x(64, d, 9);
    for (auto _ : state) {
        auto shap = mait::tree_shap(model, probe);
        benchmark::DoNotOptimize(shap);
    }
}
BENCHMARK(bench_tree_shap)->Arg(50)->Arg(200);

} // namespace
