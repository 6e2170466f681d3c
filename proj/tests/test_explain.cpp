#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mait/error.hpp"
#include "mait/explain.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"
#include "tree_shap_oracle.hpp"

using namespace mait;

namespace {

TrainedModel tree_model(std::vector<Tree> trees, std::size_t n_features,
                        double scale = 1.0, double base = 0.0) {
    TrainedModel m;
    m.spec.algorithm = Algorithm::Hgbt;
    m.trees = std::move(trees);
    m.tree_scale = scale;
    m.base_score = base;
    m.feature_names.resize(n_features);
    for (std::size_t i = 0; i < n_features; ++i) m.feature_names[i] = "f" + std::to_string(i);
    return m;
}

} // namespace

TEST_CASE("tree_shap on a single leaf attributes nothing") {
    Tree t;
    t.nodes.push_back({});
    t.nodes[0].value = 0.7;
    t.nodes[0].cover = 10.0;
    const auto m = tree_model({t}, 2);
    Matrix x(1, 2);
    const auto shap = tree_shap(m, x);
    CHECK(shap.base_value == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(shap.values.at(0, 0) == 0.0);
    CHECK(shap.values.at(0, 1) == 0.0);
}

TEST_CASE("depth-1 tree with 50/50 covers gives phi = 0.5 on the hot side") {
    Tree t;
    t.nodes.resize(3);
    t.nodes[0].feature = 0;
    t.nodes[0].threshold = 0.5;
    t.nodes[0].left = 1;
    t.nodes[0].right = 2;
    t.nodes[0].cover = 100.0;
    t.nodes[1].value = 0.0;
    t.nodes[1].cover = 50.0;
    t.nodes[2].value = 1.0;
    t.nodes[2].cover = 50.0;
    const auto m = tree_model({t}, 2);
    Matrix x(1, 2);
    x.at(0, 0) = 0.9; // the value-1 side
    const auto shap = tree_shap(m, x);
    CHECK(shap.values.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(shap.values.at(0, 1) == 0.0);
    CHECK(shap.base_value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tree_shap matches the exhaustive coalition oracle on random trees") {
    Rng rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = 2 + rng.index(3); // up to 4 features
        const auto tree = oracle::random_tree(rng, d, 3);
        const auto m = tree_model({tree}, d);
        Matrix x(3, d);
        for (double& v : x.data) v = rng.uniform01();
        const auto shap = tree_shap(m, x);
        for (std::size_t r = 0; r < x.rows; ++r) {
            const auto expect = oracle::brute_force_shap(tree, x.row(r), d);
            for (std::size_t f = 0; f < d; ++f)
                CHECK(shap.values.at(r, f) == doctest::Approx(expect[f]).epsilon(1e-9));
            // local accuracy against the raw traversal
            double total = shap.base_value;
            for (std::size_t f = 0; f < d; ++f) total += shap.values.at(r, f);
            CHECK(total == doctest::Approx(tree.predict(x.row(r))).epsilon(1e-9));
        }
    }
}

TEST_CASE("ensemble attributions are the sum of per-tree attributions") {
    Rng rng(11);
    const std::size_t d = 3;
    const auto t1 = oracle::random_tree(rng, d, 3);
    const auto t2 = oracle::random_tree(rng, d, 3);
    Matrix x(2, d);
    for (double& v : x.data) v = rng.uniform01();

    const auto both = tree_shap(tree_model({t1, t2}, d), x);
    const auto only1 = tree_shap(tree_model({t1}, d), x);
    const auto only2 = tree_shap(tree_model({t2}, d), x);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t f = 0; f < d; ++f)
            CHECK(both.values.at(r, f) ==
                  doctest::Approx(only1.values.at(r, f) + only2.values.at(r, f)).epsilon(1e-12));
}

TEST_CASE("symmetric features in a symmetric tree share attribution") {
    // root splits f0, both children split f1; leaf pattern is symmetric
    Tree t;
    t.nodes.resize(7);
    auto set_split = [&](int slot, int feature, int left, int right, double cover) {
        t.nodes[slot].feature = feature;
        t.nodes[slot].threshold = 0.5;
        t.nodes[slot].left = left;
        t.nodes[slot].right = right;
        t.nodes[slot].cover = cover;
    };
    auto set_leaf = [&](int slot, double value, double cover) {
        t.nodes[slot].value = value;
        t.nodes[slot].cover = cover;
    };
    set_split(0, 0, 1, 2, 100.0);
    set_split(1, 1, 3, 4, 50.0);
    set_split(2, 1, 5, 6, 50.0);
    set_leaf(3, 0.0, 25.0); // f0 low,  f1 low
    set_leaf(4, 1.0, 25.0); // f0 low,  f1 high
    set_leaf(5, 1.0, 25.0); // f0 high, f1 low
    set_leaf(6, 0.0, 25.0); // f0 high, f1 high
    const auto m = tree_model({t}, 2);
    Matrix x(2, 2);
    x.at(0, 0) = 0.8;
    x.at(0, 1) = 0.8;
    x.at(1, 0) = 0.2;
    x.at(1, 1) = 0.2;
    const auto shap = tree_shap(m, x);
    for (std::size_t r = 0; r < 2; ++r)
        CHECK(shap.values.at(r, 0) == doctest::Approx(shap.values.at(r, 1)).epsilon(1e-12));
}

TEST_CASE("features absent from every split get exactly zero") {
    Rng rng(13);
    const auto tree = oracle::random_tree(rng, 2, 3); // only features 0 and 1
    const auto m = tree_model({tree}, 4);
    Matrix x(3, 4);
    for (double& v : x.data) v = rng.uniform01();
    const auto shap = tree_shap(m, x);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(shap.values.at(r, 2) == 0.0);
        CHECK(shap.values.at(r, 3) == 0.0);
    }
}

TEST_CASE("linear shap fixtures") {
    TrainedModel m;
    m.spec.algorithm = Algorithm::LogRegL1;
    m.feature_names = {"a", "b"};
    m.coefficients = {2.0, 0.0};
    m.intercept = 0.3;
    Matrix x(2, 2);
    x.at(0, 0) = 1.0;
    x.at(0, 1) = 1.0;
    x.at(1, 0) = 0.0; // equals the background mean
    x.at(1, 1) = 0.0;
    const std::vector<double> mu{0.0, 0.0};
    const auto shap = linear_shap(m, x, mu);
    CHECK(shap.values.at(0, 0) == 2.0);
    CHECK(shap.values.at(0, 1) == 0.0);
    CHECK(shap.values.at(1, 0) == 0.0);
    CHECK(shap.base_value == doctest::Approx(0.3).epsilon(1e-15));

    // local accuracy is exact for the linear engine
    const auto margins = predict_margin(m, x);
    for (std::size_t r = 0; r < 2; ++r) {
        double total = shap.base_value;
        for (std::size_t f = 0; f < 2; ++f) total += shap.values.at(r, f);
        CHECK(total == doctest::Approx(margins[r]).epsilon(1e-12));
    }
}

namespace {

struct GnbSetup {
    TrainedModel model;
    Matrix x;
    Matrix background;
};

GnbSetup small_gnb(std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(40, 3);
    std::vector<int> y(40);
    std::vector<double> w(40, 1.0);
    for (std::size_t r = 0; r < 40; ++r) {
        y[r] = static_cast<int>(r % 2);
        x.at(r, 0) = (y[r] ? 1.0 : -1.0) + 0.5 * rng.normal();
        x.at(r, 1) = rng.normal();
        x.at(r, 2) = 7.0; // constant in data and background
    }
    GnbSetup s;
    s.model = fit_classifier(default_spec(Algorithm::Gnb, 1), x, y, w);
    s.background = x;
    s.x = x.take_rows(std::vector<std::size_t>{0, 1, 2, 3});
    return s;
}

} // namespace

TEST_CASE("mc_shapley: dummy feature, efficiency, linear agreement") {
    const auto s = small_gnb(17);
    const auto shap = mc_shapley(s.model, s.x, s.background, 200, 3);

    // constant feature: zero within 3 standard errors (and tiny in absolute terms)
    for (std::size_t r = 0; r < s.x.rows; ++r)
        CHECK(std::fabs(shap.values.at(r, 2)) <= 3.0 * shap.se.at(r, 2) + 1e-12);

    // efficiency within 3 SE of the telescoped background noise
    const auto margins = predict_margin(s.model, s.x);
    const auto bg_margins = predict_margin(s.model, s.background);
    const double bg_sd = std::sqrt(sample_variance(bg_margins));
    const double se = bg_sd / std::sqrt(200.0);
    for (std::size_t r = 0; r < s.x.rows; ++r) {
        double total = shap.base_value;
        for (std::size_t f = 0; f < 3; ++f) total += shap.values.at(r, f);
        CHECK(std::fabs(total - margins[r]) <= 3.0 * se + 1e-9);
    }

    // on a linear model the sampled engine agrees with the closed form
    TrainedModel linear;
    linear.spec.algorithm = Algorithm::LinearReg;
    linear.feature_names = {"a", "b", "c"};
    linear.coefficients = {1.5, -2.0, 0.7};
    linear.intercept = 0.1;
    std::vector<double> mu(3);
    for (std::size_t c = 0; c < 3; ++c) mu[c] = mean(s.background.column(c));
    const auto exact = linear_shap(linear, s.x, mu);
    const auto sampled = mc_shapley(linear, s.x, s.background, 300, 5);
    for (std::size_t r = 0; r < s.x.rows; ++r)
        for (std::size_t f = 0; f < 3; ++f) {
            const double tol = 3.0 * sampled.se.at(r, f) + 1e-9;
            CHECK(std::fabs(sampled.values.at(r, f) - exact.values.at(r, f)) <= tol);
        }
}

TEST_CASE("permutation importance: unused feature drops exactly zero") {
    Rng rng(19);
    Tree t = oracle::random_tree(rng, 2, 3);
    auto m = tree_model({t}, 4);
    m.spec.algorithm = Algorithm::RandomForest; // probability-scale margin is fine here
    for (auto& nd : m.trees[0].nodes)
        if (nd.is_leaf()) nd.value = std::clamp(nd.value, 0.0, 1.0);
    Matrix x(50, 4);
    std::vector<int> y(50);
    for (std::size_t r = 0; r < 50; ++r) {
        for (std::size_t c = 0; c < 4; ++c) x.at(r, c) = rng.uniform01();
        y[r] = static_cast<int>(rng.index(2));
    }
    y[0] = 1;
    y[1] = 0;
    const auto pi = permutation_importance(m, x, y, ImportanceMetric::Auc, 5, 3);
    CHECK(pi.mean_drop[2] == 0.0);
    CHECK(pi.mean_drop[3] == 0.0);
    CHECK(pi.sd[2] == 0.0);

    const auto pi2 = permutation_importance(m, x, y, ImportanceMetric::Auc, 5, 3);
    CHECK(pi.mean_drop == pi2.mean_drop); // deterministic
}

TEST_CASE("permutation importance ranks a planted dominant feature first") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 60);
        Matrix x(150, 4);
        std::vector<int> y(150);
        std::vector<double> w(150, 1.0);
        for (std::size_t r = 0; r < 150; ++r) {
            y[r] = static_cast<int>(r % 2);
            x.at(r, 0) = (y[r] ? 1.6 : -1.6) + rng.normal();
            for (std::size_t c = 1; c < 4; ++c) x.at(r, c) = rng.normal();
        }
        auto spec = default_spec(Algorithm::RandomForest, seed);
        spec.hyperparameters["n_trees"] = 30;
        const auto m = fit_classifier(spec, x, y, w);
        const auto pi =
            permutation_importance(m, x, y, ImportanceMetric::Auc, 5, seed + 900);
        bool first = true;
        for (std::size_t c = 1; c < 4; ++c) first = first && pi.mean_drop[0] > pi.mean_drop[c];
        if (first) ++wins;
    }
    CHECK(wins >= 9);
}

TEST_CASE("pair interactions: additive models score near zero, XOR pairs dominate") {
    // purely additive model on well-separated data
    {
        Rng rng(23);
        TrainedModel linear;
        linear.spec.algorithm = Algorithm::LogRegL1;
        linear.feature_names = {"a", "b", "c"};
        linear.coefficients = {1.0, -1.0, 0.5};
        linear.intercept = 0.0;
        Matrix x(300, 3);
        std::vector<int> y(300);
        for (std::size_t r = 0; r < 300; ++r) {
            for (std::size_t c = 0; c < 3; ++c) x.at(r, c) = rng.normal();
            const double margin = x.at(r, 0) - x.at(r, 1) + 0.5 * x.at(r, 2);
            y[r] = margin + 0.5 * rng.normal() > 0 ? 1 : 0;
        }
        const auto pairs =
            pair_interactions(linear, x, y, ImportanceMetric::Auc, 10, 29);
        CHECK(pairs.size() == 3);
        for (const auto& pr : pairs) CHECK(std::fabs(pr.score) < 0.1);
    }

    // XOR-labeled data with a tree model: the XOR pair has the top score
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 80);
        Matrix x(240, 4);
        std::vector<int> y(240);
        std::vector<double> w(240, 1.0);
        for (std::size_t r = 0; r < 240; ++r) {
            for (std::size_t c = 0; c < 4; ++c) x.at(r, c) = rng.normal();
            y[r] = (x.at(r, 0) > 0) != (x.at(r, 1) > 0) ? 1 : 0;
        }
        auto spec = default_spec(Algorithm::RandomForest, seed);
        spec.hyperparameters["n_trees"] = 40;
        spec.hyperparameters["min_leaf"] = 5;
        const auto m = fit_classifier(spec, x, y, w);
        const auto pairs =
            pair_interactions(m, x, y, ImportanceMetric::Auc, 5, seed + 500);
        CHECK(pairs.size() == 6); // D=4 -> 6 unordered pairs
        const auto top = std::max_element(
            pairs.begin(), pairs.end(),
            [](const PairInteraction& a, const PairInteraction& b) { return a.score < b.score; });
        if (top->i == 0 && top->j == 1) ++wins;
    }
    CHECK(wins >= 9);
}

TEST_CASE("shap significance: the AND clause keeps silent features out") {
    // one feature with zero attribution everywhere, one strong feature
    ShapMatrix shap;
    shap.feature_names = {"zero", "strong"};
    shap.values = Matrix(60, 2);
    Rng rng(31);
    for (std::size_t r = 0; r < 60; ++r) {
        shap.values.at(r, 0) = 0.0;
        shap.values.at(r, 1) = 1.0 + 0.1 * rng.normal();
    }
    const auto sig = shap_significance(shap, 100, 3);
    CHECK(sig.crossing_fraction[0] == 0.0); // IQR [0,0] never crosses tau ~ 0.5
    CHECK(sig.significant[0] == 0);         // median 0 < tau
    CHECK(sig.significant[1] == 1);
    CHECK_THROWS_AS(shap_significance(shap, 19, 3), ArgumentError);
}

TEST_CASE("shap significance flags the planted feature across seeds") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 90);
        ShapMatrix shap;
        shap.feature_names = {"planted", "n1", "n2", "n3"};
        shap.values = Matrix(80, 4);
        for (std::size_t r = 0; r < 80; ++r) {
            shap.values.at(r, 0) = 2.0 + 0.3 * rng.normal();
            for (std::size_t c = 1; c < 4; ++c) shap.values.at(r, c) = 0.05 * rng.normal();
        }
        const auto sig = shap_significance(shap, 200, seed);
        bool ok = sig.significant[0] == 1;
        for (std::size_t c = 1; c < 4; ++c) ok = ok && sig.significant[c] == 0;
        if (ok) ++wins;
    }
    CHECK(wins >= 9);
}

TEST_CASE("shap clusters find two separated blobs and survive duplication") {
    Rng rng(37);
    ShapMatrix shap;
    shap.feature_names = {"a", "b"};
    shap.values = Matrix(60, 2);
    std::vector<int> y(60);
    std::vector<double> p(60);
    for (std::size_t r = 0; r < 60; ++r) {
        const bool blob = r < 30;
        shap.values.at(r, 0) = (blob ? -4.0 : 4.0) + 0.2 * rng.normal();
        shap.values.at(r, 1) = (blob ? -4.0 : 4.0) + 0.2 * rng.normal();
        y[r] = blob ? 0 : 1;
        p[r] = blob ? 0.2 : 0.8;
    }
    const auto res = shap_clusters(shap, y, p, 0.5, 2, 6, 5);
    CHECK(res.chosen_k == 2);
    // blob-faithful assignment
    for (std::size_t r = 1; r < 30; ++r) CHECK(res.labels[r] == res.labels[0]);
    for (std::size_t r = 31; r < 60; ++r) CHECK(res.labels[r] == res.labels[30]);
    CHECK(res.labels[0] != res.labels[30]);
    CHECK(res.per_cluster_metrics.size() == 2);

    // duplicating every row keeps the chosen k and per-cluster importances
    ShapMatrix doubled;
    doubled.feature_names = shap.feature_names;
    doubled.values = Matrix(120, 2);
    std::vector<int> y2(120);
    std::vector<double> p2(120);
    for (std::size_t r = 0; r < 120; ++r) {
        doubled.values.at(r, 0) = shap.values.at(r % 60, 0);
        doubled.values.at(r, 1) = shap.values.at(r % 60, 1);
        y2[r] = y[r % 60];
        p2[r] = p[r % 60];
    }
    const auto res2 = shap_clusters(doubled, y2, p2, 0.5, 2, 6, 5);
    CHECK(res2.chosen_k == res.chosen_k);
    std::vector<double> imp1(res.per_cluster_importance.data);
    std::vector<double> imp2(res2.per_cluster_importance.data);
    std::sort(imp1.begin(), imp1.end());
    std::sort(imp2.begin(), imp2.end());
    for (std::size_t i = 0; i < imp1.size(); ++i)
        CHECK(imp1[i] == doctest::Approx(imp2[i]).epsilon(1e-6));

    // singleton k range chooses that k by vacuity
    const auto res3 = shap_clusters(shap, y, p, 0.5, 3, 3, 5);
    CHECK(res3.chosen_k == 3);

    // degenerate identical rows collapse to one flagged cluster
    ShapMatrix flat;
    flat.feature_names = {"a"};
    flat.values = Matrix(10, 1, 0.25);
    std::vector<int> fy(10, 1);
    fy[0] = 0;
    std::vector<double> fp(10, 0.9);
    const auto res4 = shap_clusters(flat, fy, fp, 0.5, 2, 4, 5);
    CHECK(res4.degenerate);
    CHECK(res4.chosen_k == 1);
}

TEST_CASE("correct-only importance filters to correctly classified rows") {
    ShapMatrix shap;
    shap.feature_names = {"a", "b"};
    shap.values = Matrix(4, 2);
    for (std::size_t r = 0; r < 4; ++r) {
        shap.values.at(r, 0) = static_cast<double>(r + 1);
        shap.values.at(r, 1) = -static_cast<double>(r + 1) * 0.5;
    }
    const std::vector<int> y{1, 1, 0, 0};
    {
        // all rows correct -> equals the plain mean of absolutes
        const std::vector<double> p{0.9, 0.8, 0.1, 0.2};
        const auto res = correct_only_importance(shap, y, p, 0.5);
        CHECK(res.defined);
        CHECK(res.correct_rows == 4);
        CHECK(res.mean_abs[0] == doctest::Approx((1 + 2 + 3 + 4) / 4.0).epsilon(1e-15));
    }
    {
        // exactly one correct row -> that row's absolutes
        const std::vector<double> p{0.9, 0.2, 0.9, 0.9};
        const auto res = correct_only_importance(shap, y, p, 0.5);
        CHECK(res.correct_rows == 1);
        CHECK(res.mean_abs[0] == 1.0);
        CHECK(res.mean_abs[1] == 0.5);
    }
    {
        // zero correct rows -> flagged missing
        const std::vector<double> p{0.1, 0.2, 0.9, 0.9};
        const auto res = correct_only_importance(shap, y, p, 0.5);
        CHECK(!res.defined);
        CHECK(std::isnan(res.mean_abs[0]));
    }
}

TEST_CASE("unified importance normalizes, averages and ranks") {
    const std::vector<std::string> features{"a", "b"};
    {
        const auto t = unify_importance({{"m1", {0.0, 10.0}}, {"m2", {0.0, 1.0}}}, features);
        CHECK(t.normalized.at(0, 0) == 0.0);
        CHECK(t.normalized.at(0, 1) == 1.0);
        CHECK(t.normalized.at(1, 1) == 1.0);
        CHECK(t.unified == std::vector<double>{0.0, 1.0});
        CHECK(t.rank == std::vector<std::size_t>{2, 1});
    }
    {
        // single method: ranking equals that method's ranking
        const auto t = unify_importance({{"only", {3.0, 7.0}}}, features);
        CHECK(t.rank == std::vector<std::size_t>{2, 1});
    }
    {
        // positive affine rescaling of one method leaves ranks unchanged
        const std::vector<std::string> f3{"a", "b", "c"};
        const auto base =
            unify_importance({{"m1", {1.0, 5.0, 3.0}}, {"m2", {0.2, 0.9, 0.1}}}, f3);
        const auto rescaled = unify_importance(
            {{"m1", {1.0, 5.0, 3.0}}, {"m2", {0.2 * 7 + 2, 0.9 * 7 + 2, 0.1 * 7 + 2}}}, f3);
        CHECK(base.rank == rescaled.rank);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(base.unified[i] == doctest::Approx(rescaled.unified[i]).epsilon(1e-12));
    }
    {
        // constant method maps to all zeros, flagged
        const auto t = unify_importance({{"flat", {2.0, 2.0}}}, features);
        CHECK(t.constant_method[0] == 1);
        CHECK(t.normalized.at(0, 0) == 0.0);
    }
    CHECK_THROWS_AS(unify_importance({{"m", {1.0}}}, features), ArgumentError);
    CHECK_THROWS_AS(unify_importance({}, features), ArgumentError);
}

TEST_CASE("attributions_for dispatches by model family") {
    Rng rng(41);
    Matrix x(30, 2);
    std::vector<int> y(30);
    std::vector<double> w(30, 1.0);
    for (std::size_t r = 0; r < 30; ++r) {
        y[r] = static_cast<int>(r % 2);
        x.at(r, 0) = (y[r] ? 1.0 : -1.0) + 0.3 * rng.normal();
        x.at(r, 1) = rng.normal();
    }
    auto rf_spec = default_spec(Algorithm::RandomForest, 1);
    rf_spec.hyperparameters["n_trees"] = 5;
    const auto rf = fit_classifier(rf_spec, x, y, w);
    const auto rf_shap = attributions_for(rf, x, x, 10, 1);
    CHECK(rf_shap.scale == ShapMatrix::Scale::Probability);
    // local accuracy for the exact engine
    const auto margins = predict_margin(rf, x);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double total = rf_shap.base_value;
        for (std::size_t f = 0; f < 2; ++f) total += rf_shap.values.at(r, f);
        CHECK(std::fabs(total - margins[r]) <= 1e-6);
    }

    const auto gnb = fit_classifier(default_spec(Algorithm::Gnb, 1), x, y, w);
    const auto gnb_shap = attributions_for(gnb, x, x, 20, 1);
    CHECK(gnb_shap.se.rows == x.rows); // sampled engine carries standard errors
}
