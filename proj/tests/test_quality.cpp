#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mait/error.hpp"
#include "mait/quality.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

using namespace mait;

namespace {

Table numeric_table(const std::vector<std::pair<std::string, std::vector<double>>>& cols,
                    ColumnKind kind = ColumnKind::Continuous) {
    std::vector<ColumnSpec> specs;
    for (const auto& [name, values] : cols) specs.push_back({name, kind, {}});
    Table t(specs, cols.front().second.size());
    for (std::size_t c = 0; c < cols.size(); ++c) t.column(c).num = cols[c].second;
    return t;
}

} // namespace

TEST_CASE("quality_profile counts missingness, variance and rare categories") {
    std::vector<ColumnSpec> specs{{"x", ColumnKind::Continuous, {}},
                                  {"c", ColumnKind::Continuous, {}},
                                  {"g", ColumnKind::Categorical, {}}};
    Table t(specs, 10);
    for (std::size_t r = 0; r < 10; ++r) {
        t.column("x").num[r] = static_cast<double>(r);
        t.column("c").num[r] = 3.14;
        t.column("g").cat[r] = r == 0 ? "rare" : "common";
    }
    t.column("x").missing[0] = 1;
    t.column("x").missing[5] = 1;

    const auto p = quality_profile(t, 0.0, 0.2);
    CHECK(p.column_missing_fraction[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(p.near_constant_columns == std::vector<std::string>{"c"});
    REQUIRE(p.rare_categories.count("g"));
    CHECK(p.rare_categories.at("g") == std::vector<std::string>{"rare"});
}

TEST_CASE("category appearing once in 100 rows is rare at 5%") {
    std::vector<ColumnSpec> specs{{"g", ColumnKind::Categorical, {}}};
    Table t(specs, 100);
    for (std::size_t r = 0; r < 100; ++r) t.column("g").cat[r] = r == 42 ? "one" : "many";
    const auto p = quality_profile(t, 0.0, 0.05);
    REQUIRE(p.rare_categories.count("g"));
    CHECK(p.rare_categories.at("g") == std::vector<std::string>{"one"});
}

TEST_CASE("spearman basics: monotone pairs") {
    auto t = numeric_table({{"x", {1, 2, 3}}, {"y", {10, 20, 30}}, {"z", {3, 2, 1}}});
    const auto m = spearman_matrix(t);
    const auto idx = [&](const std::string& n) {
        return std::find(m.names.begin(), m.names.end(), n) - m.names.begin();
    };
    CHECK(m.rho.at(idx("x"), idx("y")) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.rho.at(idx("x"), idx("z")) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(m.rho.at(idx("x"), idx("x")) == 1.0);
}

TEST_CASE("spearman with ties matches a mid-rank oracle to 1e-12") {
    auto t = numeric_table({{"x", {1, 2, 2, 4}}, {"y", {1, 3, 2, 4}}});
    const auto m = spearman_matrix(t);
    const auto rx = mid_ranks(t.column("x").num);
    const auto ry = mid_ranks(t.column("y").num);
    const double oracle = pearson(rx, ry);
    CHECK(m.rho.at(0, 1) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
    Rng rng(5);
    std::vector<double> x(50), y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal() + 0.5 * x[i];
    }
    auto t1 = numeric_table({{"x", x}, {"y", y}});
    std::vector<double> xt(50), yt(50);
    for (std::size_t i = 0; i < 50; ++i) {
        xt[i] = std::exp(x[i]);          // strictly increasing
        yt[i] = std::atan(y[i]) * 3 + 7; // strictly increasing
    }
    auto t2 = numeric_table({{"x", xt}, {"y", yt}});
    CHECK(spearman_matrix(t1).rho.at(0, 1) ==
          doctest::Approx(spearman_matrix(t2).rho.at(0, 1)).epsilon(1e-15));
}

TEST_CASE("spearman drops pairs with fewer than 3 complete rows") {
    auto t = numeric_table({{"x", {1, 2, 3, 4}}, {"y", {1, 2, 3, 4}}});
    t.column("y").missing = {1, 1, 0, 0};
    const auto m = spearman_matrix(t);
    CHECK(std::isnan(m.rho.at(0, 1)));
}

namespace {

Table pb_table(const std::vector<double>& x, const std::vector<int>& y) {
    std::vector<ColumnSpec> specs{{"x", ColumnKind::Continuous, {}},
                                  {"y", ColumnKind::BinaryOutcome, {}}};
    Table t(specs, x.size());
    t.column("x").num = x;
    for (std::size_t i = 0; i < y.size(); ++i) t.column("y").num[i] = y[i];
    return t;
}

} // namespace

TEST_CASE("point_biserial of the coding itself is 1") {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(i % 2);
        y.push_back(i % 2);
    }
    const auto t = pb_table(x, y);
    const auto ci = point_biserial(t, "x", "y", 100, 0.95, 7);
    CHECK(ci.estimate == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("point_biserial on independent noise: CI contains 0") {
    Rng rng(11);
    std::vector<double> x(400);
    std::vector<int> y(400);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = i % 2;
    }
    const auto t = pb_table(x, y);
    const auto ci = point_biserial(t, "x", "y", 500, 0.95, 13);
    CHECK(ci.lo < 0.0);
    CHECK(ci.hi > 0.0);
    CHECK(ci.lo <= ci.estimate);
    CHECK(ci.estimate <= ci.hi);
}

TEST_CASE("point_biserial rejects single-class outcomes") {
    const auto t = pb_table({1, 2, 3}, {1, 1, 1});
    CHECK_THROWS_AS(point_biserial(t, "x", "y", 10, 0.95, 1), DataError);
}

TEST_CASE("narrower confidence gives nested percentile bounds") {
    Rng rng(3);
    std::vector<double> x(200);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = i % 2;
        x[i] = y[i] + 0.5 * rng.normal();
    }
    const auto t = pb_table(x, y);
    const auto wide = point_biserial(t, "x", "y", 400, 0.95, 21);
    const auto narrow = point_biserial(t, "x", "y", 400, 0.5, 21);
    CHECK(narrow.lo >= wide.lo);
    CHECK(narrow.hi <= wide.hi);
}

TEST_CASE("mutual information of identical balanced variables is ln 2") {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(i % 2);
        y.push_back(i % 2);
    }
    const auto t = pb_table(x, y);
    const auto ci = mutual_information(t, "x", "y", 10, 50, 0.95, 5);
    CHECK(ci.estimate == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mutual information of a diagonal 2x2 table is ln 2 by hand") {
    std::vector<int> xc, yc;
    for (int i = 0; i < 50; ++i) {
        xc.push_back(0);
        yc.push_back(0);
        xc.push_back(1);
        yc.push_back(1);
    }
    CHECK(plug_in_mi(xc, yc) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mutual information of independents stays under 0.05 nats at n=1000") {
    Rng rng(17);
    std::vector<double> x(1000);
    std::vector<int> y(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        x[i] = rng.normal();
        y[i] = i % 2;
    }
    const auto t = pb_table(x, y);
    const auto ci = mutual_information(t, "x", "y", 10, 50, 0.95, 19);
    CHECK(ci.estimate < 0.05);
    CHECK(ci.estimate >= 0.0);
}

TEST_CASE("mutual information is invariant under category relabeling") {
    std::vector<ColumnSpec> specs{{"g", ColumnKind::Categorical, {}},
                                  {"y", ColumnKind::BinaryOutcome, {}}};
    Table a(specs, 100), b(specs, 100);
    Rng rng(23);
    for (std::size_t i = 0; i < 100; ++i) {
        const int cat = static_cast<int>(rng.index(3));
        const int label = (cat == 0) == (rng.uniform01() < 0.8) ? 1 : 0;
        a.column("g").cat[i] = std::string(1, static_cast<char>('A' + cat));
        b.column("g").cat[i] = std::string(1, static_cast<char>('Z' - cat));
        a.column("y").num[i] = label;
        b.column("y").num[i] = label;
    }
    const auto ca = mutual_information(a, "g", "y", 10, 30, 0.95, 1);
    const auto cb = mutual_information(b, "g", "y", 10, 30, 0.95, 1);
    CHECK(ca.estimate == doctest::Approx(cb.estimate).epsilon(1e-15));
}

TEST_CASE("bootstrap intervals stabilize as resamples grow") {
    // percentile-CI width is not monotone in the resample count; what more
    // resamples buy is stability, so paired reruns must disagree less at
    // B=2000 than at B=200
    Rng rng(29);
    std::vector<double> x(120);
    std::vector<int> y(120);
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = i % 2;
        x[i] = 0.3 * y[i] + rng.normal();
    }
    const auto t = pb_table(x, y);
    double disagreement_small = 0.0, disagreement_big = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a200 = point_biserial(t, "x", "y", 200, 0.95, seed);
        const auto b200 = point_biserial(t, "x", "y", 200, 0.95, seed + 1000);
        const auto a2k = point_biserial(t, "x", "y", 2000, 0.95, seed);
        const auto b2k = point_biserial(t, "x", "y", 2000, 0.95, seed + 1000);
        disagreement_small += std::fabs(a200.lo - b200.lo) + std::fabs(a200.hi - b200.hi);
        disagreement_big += std::fabs(a2k.lo - b2k.lo) + std::fabs(a2k.hi - b2k.hi);
    }
    CHECK(disagreement_big < disagreement_small);
}

TEST_CASE("isolation c(n) normalizer fixtures") {
    CHECK(isolation_c(0) == 0.0);
    CHECK(isolation_c(1) == 0.0);
    CHECK(isolation_c(2) == doctest::Approx(1.0).epsilon(1e-15)); // 2*H(1) - 2*(1/2)
    // c(4) = 2*(1 + 1/2 + 1/3) - 2*3/4 = 11/3 - 3/2 = 13/6
    CHECK(isolation_c(4) == doctest::Approx(13.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("unsplittable data scores exactly 0.5") {
    // two identical points: every tree is a single unsplit node of size 2,
    // so E[h] = c(2) and the score collapses to 2^-1
    Matrix x(2, 2);
    x.at(0, 0) = 1.0;
    x.at(0, 1) = 2.0;
    x.at(1, 0) = 1.0;
    x.at(1, 1) = 2.0;
    const auto scores = isolation_scores(x, 5, 2, 42);
    CHECK(scores[0] == 0.5);
    CHECK(scores[1] == 0.5);
}

TEST_CASE("a planted extreme outlier has the top isolation score") {
    Rng rng(31);
    Matrix x(101, 3);
    for (std::size_t r = 0; r < 100; ++r)
        for (std::size_t c = 0; c < 3; ++c) x.at(r, c) = rng.normal();
    for (std::size_t c = 0; c < 3; ++c) x.at(100, c) = 25.0;
    const auto scores = isolation_scores(x, 200, 256, 7);
    const auto top = std::max_element(scores.begin(), scores.end()) - scores.begin();
    CHECK(top == 100);
    for (double s : scores) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("planted outlier stays argmax when every row is duplicated") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 100);
        Matrix x(50, 2);
        for (std::size_t r = 0; r < 49; ++r)
            for (std::size_t c = 0; c < 2; ++c) x.at(r, c) = rng.normal();
        x.at(49, 0) = 30.0;
        x.at(49, 1) = -30.0;

        Matrix doubled(100, 2);
        for (std::size_t r = 0; r < 100; ++r)
            for (std::size_t c = 0; c < 2; ++c) doubled.at(r, c) = x.at(r % 50, c);
        const auto scores = isolation_scores(doubled, 200, 256, seed);
        const auto top = std::max_element(scores.begin(), scores.end()) - scores.begin();
        if (top % 50 == 49) ++wins;
    }
    CHECK(wins >= 9);
}

TEST_CASE("associations bundles spearman, point-biserial and MI") {
    Rng rng(37);
    std::vector<ColumnSpec> specs{{"a", ColumnKind::Continuous, {}},
                                  {"b", ColumnKind::Continuous, {}},
                                  {"g", ColumnKind::Categorical, {}},
                                  {"y", ColumnKind::BinaryOutcome, {}}};
    Table t(specs, 60);
    for (std::size_t r = 0; r < 60; ++r) {
        const int label = static_cast<int>(r % 2);
        t.column("a").num[r] = label + 0.3 * rng.normal();
        t.column("b").num[r] = rng.normal();
        t.column("g").cat[r] = label ? "pos" : "neg";
        t.column("y").num[r] = label;
    }
    const auto rep = associations(t, "y", 50, 0.95, 3);
    CHECK(rep.outcome_associations.size() == 3);
    for (const auto& e : rep.outcome_associations) {
        if (e.feature == "g") CHECK(!e.has_point_biserial);
        else CHECK(e.has_point_biserial);
        CHECK(e.mutual_information.estimate >= 0.0);
    }
}
