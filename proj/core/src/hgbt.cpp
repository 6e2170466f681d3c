#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "mait/error.hpp"
#include "mait/model.hpp"
#include "mait/stats.hpp"

namespace mait::detail {

namespace {

constexpr std::uint8_t kMissingBin = 255;

struct Binned {
    std::vector<std::vector<double>> edges; // per feature, ascending, deduped
    std::vector<std::uint8_t> codes;        // row-major
    std::size_t rows = 0, cols = 0;

    std::uint8_t code(std::size_t r, std::size_t c) const { return codes[r * cols + c]; }
};

Binned bin_features(const Matrix& x, int max_bins) {
    Binned b;
    b.rows = x.rows;
    b.cols = x.cols;
    b.edges.resize(x.cols);
    b.codes.resize(x.rows * x.cols);

    for (std::size_t c = 0; c < x.cols; ++c) {
        std::vector<double> observed;
        observed.reserve(x.rows);
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double v = x.at(r, c);
            if (!std::isnan(v)) observed.push_back(v);
        }
        std::sort(observed.begin(), observed.end());
        auto& edges = b.edges[c];
        if (!observed.empty()) {
            for (int i = 1; i < max_bins; ++i) {
                edges.push_back(
                    quantile_sorted(observed, static_cast<double>(i) / max_bins));
            }
            edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
            // drop edges at or beyond the maximum: they cannot separate anything
            while (!edges.empty() && edges.back() >= observed.back()) edges.pop_back();
        }
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double v = x.at(r, c);
            if (std::isnan(v)) {
                b.codes[r * x.cols + c] = kMissingBin;
                continue;
            }
            // bin = number of edges strictly below v
            const auto it = std::lower_bound(edges.begin(), edges.end(), v);
            b.codes[r * x.cols + c] = static_cast<std::uint8_t>(it - edges.begin());
        }
    }
    return b;
}

struct HistSplit {
    bool found = false;
    int feature = -1;
    int boundary = -1; // codes <= boundary go left
    bool missing_left = true;
    double gain = 0.0;
};

struct LeafState {
    std::vector<std::uint32_t> rows;
    double grad = 0.0;
    double hess = 0.0;
    double cover = 0.0;
    int node = -1; // slot in the tree
    int depth = 0;
    HistSplit best;
};

double leaf_objective(double g, double h, double l2) {
    const double denom = h + l2;
    return denom > 0.0 ? g * g / denom : 0.0;
}

HistSplit find_hist_split(const Binned& bx, const LeafState& leaf, std::span<const double> grad,
                          std::span<const double> hess, double l2, std::size_t min_leaf) {
    HistSplit best;
    const double parent_obj = leaf_objective(leaf.grad, leaf.hess, l2);

    for (std::size_t f = 0; f < bx.cols; ++f) {
        const std::size_t n_bins = bx.edges[f].size() + 1;
        std::vector<double> hg(n_bins + 1, 0.0), hh(n_bins + 1, 0.0);
        std::vector<std::size_t> hc(n_bins + 1, 0);
        double miss_g = 0.0, miss_h = 0.0;
        std::size_t miss_c = 0;
        for (std::uint32_t r : leaf.rows) {
            const std::uint8_t code = bx.code(r, f);
            if (code == kMissingBin) {
                miss_g += grad[r];
                miss_h += hess[r];
                ++miss_c;
            } else {
                hg[code] += grad[r];
                hh[code] += hess[r];
                ++hc[code];
            }
        }

        double lg = 0.0, lh = 0.0;
        std::size_t lc = 0;
        // boundary after bin b: observed codes <= b left, rest right
        for (std::size_t bnd = 0; bnd + 1 < n_bins; ++bnd) {
            lg += hg[bnd];
            lh += hh[bnd];
            lc += hc[bnd];
            for (int miss_left = 1; miss_left >= 0; --miss_left) {
                const double gl = lg + (miss_left ? miss_g : 0.0);
                const double hl = lh + (miss_left ? miss_h : 0.0);
                const std::size_t cl = lc + (miss_left ? miss_c : 0);
                const std::size_t cr = leaf.rows.size() - cl;
                if (cl < min_leaf || cr < min_leaf) continue;
                const double gain = 0.5 * (leaf_objective(gl, hl, l2) +
                                           leaf_objective(leaf.grad - gl, leaf.hess - hl, l2) -
                                           parent_obj);
                const int fi = static_cast<int>(f);
                const int bi = static_cast<int>(bnd);
                const bool better =
                    !best.found || gain > best.gain ||
                    (gain == best.gain &&
                     (fi < best.feature ||
                      (fi == best.feature &&
                       (bi < best.boundary ||
                        (bi == best.boundary && miss_left == 1 && !best.missing_left)))));
                if (better && gain > 1e-12) {
                    best.found = true;
                    best.feature = fi;
                    best.boundary = bi;
                    best.missing_left = miss_left == 1;
                    best.gain = gain;
                }
            }
        }
    }
    return best;
}

} // namespace

TrainedModel fit_hgbt(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                      std::span<const double> w) {
    const double learning_rate = spec.hyper("learning_rate", 0.1);
    const int max_leaves = static_cast<int>(spec.hyper("max_leaves", 31));
    const int n_iter = static_cast<int>(spec.hyper("n_iter", 150));
    const double l2 = spec.hyper("l2", 1.0);
    const int max_bins = std::min(255, static_cast<int>(spec.hyper("max_bins", 255)));
    const std::size_t min_leaf = static_cast<std::size_t>(spec.hyper("min_leaf", 5));
    const std::size_t n = x.rows;

    const Binned bx = bin_features(x, max_bins);

    double sw = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        swy += w[i] * static_cast<double>(y[i]);
    }
    if (swy <= 0.0 || swy >= sw) throw TrainingError("hgbt: single-class labels");

    TrainedModel model;
    model.spec = spec;
    model.base_score = std::log(swy / (sw - swy));
    model.tree_scale = 1.0;

    std::vector<double> margins(n, model.base_score);
    std::vector<double> grad(n), hess(n);

    auto weighted_loss = [&] {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            loss += w[i] * (log1pexp(margins[i]) - static_cast<double>(y[i]) * margins[i]);
        return loss / sw;
    };
    model.training_loss.push_back(weighted_loss());

    for (int iter = 0; iter < n_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margins[i]);
            grad[i] = w[i] * (p - static_cast<double>(y[i]));
            hess[i] = w[i] * p * (1.0 - p);
        }

        Tree tree;
        tree.nodes.push_back({});
        std::vector<LeafState> leaves;
        {
            LeafState root;
            root.rows.resize(n);
            std::iota(root.rows.begin(), root.rows.end(), 0u);
            root.node = 0;
            for (std::size_t i = 0; i < n; ++i) {
                root.grad += grad[i];
                root.hess += hess[i];
                root.cover += w[i];
            }
            tree.nodes[0].cover = root.cover;
            root.best = find_hist_split(bx, root, grad, hess, l2, min_leaf);
            leaves.push_back(std::move(root));
        }

        while (static_cast<int>(leaves.size()) < max_leaves) {
            // split the leaf with the best gain; ties take the earliest leaf
            int pick = -1;
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (!leaves[i].best.found) continue;
                if (pick < 0 || leaves[i].best.gain > leaves[pick].best.gain) {
                    pick = static_cast<int>(i);
                }
            }
            if (pick < 0) break;

            LeafState leaf = std::move(leaves[pick]);
            leaves.erase(leaves.begin() + pick);
            const HistSplit& s = leaf.best;

            LeafState left, right;
            left.depth = right.depth = leaf.depth + 1;
            for (std::uint32_t r : leaf.rows) {
                const std::uint8_t code = bx.code(r, s.feature);
                const bool go_left =
                    code == kMissingBin ? s.missing_left : code <= s.boundary;
                LeafState& dst = go_left ? left : right;
                dst.rows.push_back(r);
                dst.grad += grad[r];
                dst.hess += hess[r];
                dst.cover += w[r];
            }

            const int li = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({});
            const int ri = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({});
            TreeNode& nd = tree.nodes[leaf.node];
            nd.feature = s.feature;
            nd.threshold = bx.edges[s.feature][s.boundary];
            nd.default_left = s.missing_left;
            nd.gain = s.gain;
            nd.left = li;
            nd.right = ri;
            left.node = li;
            right.node = ri;
            tree.nodes[li].cover = left.cover;
            tree.nodes[ri].cover = right.cover;

            left.best = find_hist_split(bx, left, grad, hess, l2, min_leaf);
            right.best = find_hist_split(bx, right, grad, hess, l2, min_leaf);
            leaves.push_back(std::move(left));
            leaves.push_back(std::move(right));
        }

        for (const LeafState& leaf : leaves) {
            const double denom = leaf.hess + l2;
            const double value =
                denom > 0.0 ? -leaf.grad / denom * learning_rate : 0.0;
            tree.nodes[leaf.node].value = value;
            for (std::uint32_t r : leaf.rows) margins[r] += value;
        }
        model.trees.push_back(std::move(tree));
        model.training_loss.push_back(weighted_loss());
    }
    return model;
}

} // namespace mait::detail
