#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mait/rng.hpp"
#include "mait/stats.hpp"

using namespace mait;

TEST_CASE("quantile uses (n-1)p linear interpolation") {
    std::vector<double> v{1, 2, 3, 4, 5};
    CHECK(quantile(v, 0.5) == 3.0);
    CHECK(quantile(v, 0.25) == 2.0);
    CHECK(quantile(v, 0.75) == 4.0);
    std::vector<double> w{1, 2, 3, 4};
    CHECK(quantile(w, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(quantile(w, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(quantile(w, 0.0) == 1.0);
    CHECK(quantile(w, 1.0) == 4.0);
    std::vector<double> one{7.0};
    CHECK(quantile(one, 0.3) == 7.0);
}

TEST_CASE("mid same ranks for ties") {
    std::vector<double> x{10, 20, 20, 30};
    const auto r = mid_ranks(x);
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 2.5);
    CHECK(r[2] == 2.5);
    CHECK(r[3] == 4.0);
}

TEST_CASE("pearson basics") {
    std::vector<double> x{1, 2, 3};
    std::vector<double> y{2, 4, 6};
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> z{3, 2, 1};
    CHECK(pearson(x, z) == doctest::Approx(-1.0).epsilon(1e-12));
    std::vector<double> c{5, 5, 5};
    CHECK(pearson(x, c) == 0.0);
}

TEST_CASE("plug-in MI of identical balanced binary variables is ln 2") {
    std::vector<int> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(0);
        y.push_back(0);
        x.push_back(1);
        y.push_back(1);
    }
    CHECK(plug_in_mi(x, y) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("quantile binning balances distinct values") {
    std::vector<double> x(100);
    for (int i = 0; i < 100; ++i) x[i] = i * 1.37 + 0.1;
    const auto codes = quantile_bin_codes(x, 4);
    std::vector<int> counts(4, 0);
    for (int c : codes) ++counts[c];
    for (int k = 0; k < 4; ++k) CHECK(std::abs(counts[k] - 25) <= 1);
}

TEST_CASE("fmt_num round-trips doubles exactly") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0, 2.5e17}) {
        const std::string s = fmt_num(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(fmt_num(std::nan("")) == "NA");
}

TEST_CASE("rng streams are deterministic and distinct") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 10; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
    CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
    (void)c;
}

TEST_CASE("rng index is within bounds and shuffle is a permutation") {
    Rng r(7);
    for (int i = 0; i < 1000; ++i) CHECK(r.index(13) < 13);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7};
    auto w = v;
    r.shuffle(w);
    auto sorted = w;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);
}
