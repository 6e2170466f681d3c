#include <cmath>
#include <vector>

#include "mait/error.hpp"
#include "mait/explain.hpp"
#include "mait/parallel.hpp"

namespace mait {

namespace {

// Path-dependent TreeSHAP (Lundberg et al.). The unique path tracks, per
// feature met so far, the fraction of subsets flowing down when the feature
// is excluded (zero_fraction) and whether the instance follows the branch
// when included (one_fraction); pweight carries the permutation weights.
struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double pweight = 0.0;
};

void extend_path(std::vector<PathElement>& path, double zero_fraction, double one_fraction,
                 int feature) {
    const int depth = static_cast<int>(path.size()); // before extension
    path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
    for (int i = depth - 1; i >= 0; --i) {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
        path[i].pweight =
            zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
    }
}

void unwind_path(std::vector<PathElement>& path, int path_index) {
    const int depth = static_cast<int>(path.size()) - 1;
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    double next_one_portion = path[depth].pweight;

    for (int i = depth - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next_one_portion * (depth + 1) /
                              (static_cast<double>(i + 1) * one_fraction);
            next_one_portion =
                tmp - path[i].pweight * zero_fraction * (depth - i) /
                          static_cast<double>(depth + 1);
        } else {
            path[i].pweight =
                path[i].pweight * (depth + 1) / (zero_fraction * (depth - i));
        }
    }
    for (int i = path_index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop_back();
}

double unwound_path_sum(const std::vector<PathElement>& path, int path_index) {
    const int depth = static_cast<int>(path.size()) - 1;
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    double next_one_portion = path[depth].pweight;
    double total = 0.0;

    if (one_fraction != 0.0) {
        for (int i = depth - 1; i >= 0; --i) {
            const double tmp = next_one_portion / (static_cast<double>(i + 1) * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (depth - i);
        }
    } else {
        for (int i = depth - 1; i >= 0; --i) {
            total += path[i].pweight / (zero_fraction * (depth - i));
        }
    }
    return total * (depth + 1);
}

struct TreeShapWalker {
    const Tree& tree;
    std::span<const double> x;
    std::span<double> phi; // per-feature output for this tree

    void recurse(int node, std::vector<PathElement> path, double zero_fraction,
                 double one_fraction, int feature) {
        extend_path(path, zero_fraction, one_fraction, feature);
        const TreeNode& nd = tree.nodes[node];

        if (nd.is_leaf()) {
            const int depth = static_cast<int>(path.size()) - 1;
            for (int i = 1; i <= depth; ++i) {
                const double w = unwound_path_sum(path, i);
                phi[path[i].feature] +=
                    w * (path[i].one_fraction - path[i].zero_fraction) * nd.value;
            }
            return;
        }

        const double v = x[nd.feature];
        const bool go_left = std::isnan(v) ? nd.default_left : v <= nd.threshold;
        const int hot = go_left ? nd.left : nd.right;
        const int cold = go_left ? nd.right : nd.left;
        const double hot_fraction = tree.nodes[hot].cover / nd.cover;
        const double cold_fraction = tree.nodes[cold].cover / nd.cover;

        double incoming_zero = 1.0, incoming_one = 1.0;
        int k = -1;
        for (int i = 1; i < static_cast<int>(path.size()); ++i) {
            if (path[i].feature == nd.feature) {
                k = i;
                break;
            }
        }
        if (k >= 0) {
            incoming_zero = path[k].zero_fraction;
            incoming_one = path[k].one_fraction;
            unwind_path(path, k);
        }

        recurse(hot, path, incoming_zero * hot_fraction, incoming_one, nd.feature);
        recurse(cold, path, incoming_zero * cold_fraction, 0.0, nd.feature);
    }
};

// cover-weighted expected leaf value of one tree
double tree_expected_value(const Tree& tree, int node = 0) {
    const TreeNode& nd = tree.nodes[node];
    if (nd.is_leaf()) return nd.value;
    const double wl = tree.nodes[nd.left].cover / nd.cover;
    const double wr = tree.nodes[nd.right].cover / nd.cover;
    return wl * tree_expected_value(tree, nd.left) + wr * tree_expected_value(tree, nd.right);
}

} // namespace

ShapMatrix tree_shap(const TrainedModel& model, const Matrix& x) {
    if (!model.is_tree_model())
        throw ArgumentError("tree_shap: model does not expose tree structure");
    if (x.cols != model.feature_names.size())
        throw PredictionError("tree_shap: feature count mismatch");
    for (const auto& tree : model.trees)
        for (const auto& nd : tree.nodes)
            if (!nd.is_leaf() && !(nd.cover > 0.0))
                throw ArgumentError("tree_shap: tree lacks positive cover counts");

    ShapMatrix shap;
    shap.feature_names = model.feature_names;
    shap.scale = model.spec.algorithm == Algorithm::Hgbt ? ShapMatrix::Scale::Margin
                                                         : ShapMatrix::Scale::Probability;
    if (!model.is_classifier()) shap.scale = ShapMatrix::Scale::Margin;
    shap.values = Matrix(x.rows, x.cols);

    double base = model.base_score;
    for (const auto& tree : model.trees) base += model.tree_scale * tree_expected_value(tree);
    shap.base_value = base;

    parallel_for(x.rows, [&](std::size_t r) {
        std::vector<double> phi(x.cols, 0.0);
        std::vector<double> tree_phi(x.cols);
        for (const auto& tree : model.trees) {
            std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
            if (!tree.nodes[0].is_leaf()) {
                TreeShapWalker walker{tree, x.row(r), tree_phi};
                walker.recurse(0, {}, 1.0, 1.0, -1);
            }
            for (std::size_t c = 0; c < x.cols; ++c) phi[c] += model.tree_scale * tree_phi[c];
        }
        for (std::size_t c = 0; c < x.cols; ++c) shap.values.at(r, c) = phi[c];
    });
    return shap;
}

} // namespace mait
