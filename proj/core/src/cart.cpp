#include "cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mait/parallel.hpp"

namespace mait::detail {

namespace {

struct NodeSums {
    double sw = 0.0;
    double swy = 0.0;
    double swyy = 0.0;
    double ymin = 0.0;
    double ymax = 0.0;
};

NodeSums node_sums(std::span<const double> targets, std::span<const double> weights,
                   std::span<const std::size_t> rows) {
    NodeSums s;
    s.ymin = targets[rows[0]];
    s.ymax = targets[rows[0]];
    for (std::size_t r : rows) {
        const double w = weights[r], y = targets[r];
        s.sw += w;
        s.swy += w * y;
        s.swyy += w * y * y;
        s.ymin = std::min(s.ymin, y);
        s.ymax = std::max(s.ymax, y);
    }
    return s;
}

// criterion contribution of a node: weighted Gini mass for classification,
// weighted sum of squared deviations for regression
double crit(bool classification, double sw, double swy, double swyy) {
    if (sw <= 0.0) return 0.0;
    if (classification) return 2.0 * swy * (sw - swy) / sw;
    return swyy - swy * swy / sw;
}

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

struct Builder {
    const Matrix& x;
    std::span<const double> targets;
    std::span<const double> weights;
    const CartParams& params;
    Rng& rng;
    Tree tree;

    int build(std::vector<std::size_t> rows, int depth) {
        const int slot = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});

        const NodeSums sums = node_sums(targets, weights, rows);
        tree.nodes[slot].cover = sums.sw;
        tree.nodes[slot].value = sums.swy / sums.sw;

        const bool pure = sums.ymin == sums.ymax;
        const bool depth_ok = params.max_depth < 0 || depth < params.max_depth;
        if (pure || !depth_ok || rows.size() < 2 * static_cast<std::size_t>(params.min_leaf)) {
            return slot;
        }

        const BestSplit split = find_split(rows, sums);
        if (!split.found) return slot;

        std::vector<std::size_t> left, right;
        left.reserve(rows.size());
        for (std::size_t r : rows) {
            (x.at(r, split.feature) <= split.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const int li = build(std::move(left), depth + 1);
        const int ri = build(std::move(right), depth + 1);
        TreeNode& nd = tree.nodes[slot];
        nd.feature = split.feature;
        nd.threshold = split.threshold;
        nd.gain = split.gain;
        nd.left = li;
        nd.right = ri;
        return slot;
    }

    BestSplit find_split(const std::vector<std::size_t>& rows, const NodeSums& sums) {
        const std::size_t d = x.cols;
        std::vector<std::size_t> feature_order(d);
        std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
        rng.shuffle(feature_order);
        const std::size_t mtry = params.mtry == 0 ? d : std::min(params.mtry, d);

        const double parent_crit = crit(params.classification, sums.sw, sums.swy, sums.swyy);

        BestSplit best;
        std::size_t evaluated = 0;
        std::vector<std::pair<double, std::size_t>> sorted(rows.size());
        for (std::size_t f : feature_order) {
            if (evaluated >= mtry) break;
            for (std::size_t i = 0; i < rows.size(); ++i)
                sorted[i] = {x.at(rows[i], f), rows[i]};
            std::sort(sorted.begin(), sorted.end());
            if (sorted.front().first == sorted.back().first) continue; // constant here
            ++evaluated;

            double lw = 0.0, lwy = 0.0, lwyy = 0.0;
            std::size_t lcount = 0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const auto [v, r] = sorted[i];
                const double w = weights[r], y = targets[r];
                lw += w;
                lwy += w * y;
                lwyy += w * y * y;
                ++lcount;
                if (sorted[i + 1].first == v) continue; // not a boundary
                if (lcount < static_cast<std::size_t>(params.min_leaf)) continue;
                if (sorted.size() - lcount < static_cast<std::size_t>(params.min_leaf)) continue;
                const double g = parent_crit -
                                 crit(params.classification, lw, lwy, lwyy) -
                                 crit(params.classification, sums.sw - lw, sums.swy - lwy,
                                      sums.swyy - lwyy);
                const int fi = static_cast<int>(f);
                const bool better =
                    !best.found || g > best.gain ||
                    (g == best.gain &&
                     (fi < best.feature || (fi == best.feature && v < best.threshold)));
                if (better && g > 1e-12) {
                    best.found = true;
                    best.feature = fi;
                    best.threshold = v;
                    best.gain = g;
                }
            }
        }
        return best;
    }
};

} // namespace

Tree build_cart_tree(const Matrix& x, std::span<const double> targets,
                     std::span<const double> weights, std::span<const std::size_t> rows,
                     const CartParams& params, Rng& rng) {
    Builder b{x, targets, weights, params, rng, {}};
    b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
    return std::move(b.tree);
}

TrainedModel fit_random_forest(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                               std::span<const double> w) {
    const int n_trees = static_cast<int>(spec.hyper("n_trees", 300));
    const int min_leaf = static_cast<int>(spec.hyper("min_leaf", 3));
    const bool bootstrap = spec.hyper("bootstrap", 1.0) != 0.0;
    const std::size_t n = x.rows;

    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<double>(y[i]);

    CartParams params;
    params.classification = true;
    params.min_leaf = std::max(1, min_leaf);
    params.mtry = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(x.cols)))));

    TrainedModel m;
    m.spec = spec;
    m.trees.resize(n_trees);
    m.tree_scale = 1.0 / static_cast<double>(n_trees);

    parallel_for(static_cast<std::size_t>(n_trees), [&](std::size_t ti) {
        Rng rng(derive_seed(spec.seed, ti));
        std::vector<std::size_t> rows(n);
        if (bootstrap) {
            for (std::size_t i = 0; i < n; ++i) rows[i] = rng.index(n);
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        m.trees[ti] = build_cart_tree(x, targets, w, rows, params, rng);
    });
    return m;
}

TrainedModel fit_rf_reg(const ModelSpec& spec, const Matrix& x, std::span<const double> y) {
    const int n_trees = static_cast<int>(spec.hyper("n_trees", 300));
    const int min_leaf = static_cast<int>(spec.hyper("min_leaf", 3));
    const bool bootstrap = spec.hyper("bootstrap", 1.0) != 0.0;
    const std::size_t n = x.rows;
    std::vector<double> unit(n, 1.0);

    CartParams params;
    params.classification = false;
    params.min_leaf = std::max(1, min_leaf);
    params.mtry = 0; // regression trees use all features

    TrainedModel m;
    m.spec = spec;
    m.trees.resize(n_trees);
    m.tree_scale = 1.0 / static_cast<double>(n_trees);

    parallel_for(static_cast<std::size_t>(n_trees), [&](std::size_t ti) {
        Rng rng(derive_seed(spec.seed, ti));
        std::vector<std::size_t> rows(n);
        if (bootstrap) {
            for (std::size_t i = 0; i < n; ++i) rows[i] = rng.index(n);
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        m.trees[ti] = build_cart_tree(x, y, unit, rows, params, rng);
    });
    return m;
}

} // namespace mait::detail
