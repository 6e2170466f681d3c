#include <algorithm>
#include <cmath>
#include <numeric>

#include "mait/error.hpp"
#include "mait/parallel.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"
#include "mait/survival.hpp"

namespace mait {

namespace {

// log-rank statistic |O - E| / sqrt(V) for a left/right partition
double log_rank_statistic(std::span<const double> time, std::span<const int> event,
                          const std::vector<std::size_t>& rows,
                          const std::vector<std::uint8_t>& goes_left) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return time[rows[a]] < time[rows[b]]; });

    double n_total = static_cast<double>(rows.size());
    double n_left = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) n_left += goes_left[i] ? 1.0 : 0.0;

    double o_minus_e = 0.0, var = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        const double t = time[rows[order[i]]];
        double d = 0.0, d_left = 0.0, leaving = 0.0, leaving_left = 0.0;
        while (j < order.size() && time[rows[order[j]]] == t) {
            const std::size_t k = order[j];
            if (event[rows[k]] == 1) {
                d += 1.0;
                if (goes_left[k]) d_left += 1.0;
            }
            leaving += 1.0;
            if (goes_left[k]) leaving_left += 1.0;
            ++j;
        }
        if (d > 0.0 && n_total > 1.0) {
            const double frac = n_left / n_total;
            o_minus_e += d_left - d * frac;
            var += d * frac * (1.0 - frac) * (n_total - d) / (n_total - 1.0);
        }
        n_total -= leaving;
        n_left -= leaving_left;
        i = j;
    }
    if (var <= 0.0) return 0.0;
    return std::fabs(o_minus_e) / std::sqrt(var);
}

struct RsfBuilder {
    const SurvivalData& d;
    int min_leaf;
    std::size_t mtry;
    Rng& rng;
    Tree tree;
    std::vector<HazardCurve> curves;

    int build(std::vector<std::size_t> rows) {
        const int slot = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[slot].cover = static_cast<double>(rows.size());

        bool any_event = false;
        for (std::size_t r : rows) any_event = any_event || d.event[r] == 1;

        double best_stat = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        if (any_event && rows.size() >= 2 * static_cast<std::size_t>(min_leaf)) {
            std::vector<std::size_t> feature_order(d.features.cols);
            std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
            rng.shuffle(feature_order);

            std::size_t evaluated = 0;
            std::vector<double> values(rows.size());
            std::vector<std::uint8_t> goes_left(rows.size());
            for (std::size_t f : feature_order) {
                if (evaluated >= mtry) break;
                for (std::size_t i = 0; i < rows.size(); ++i)
                    values[i] = d.features.at(rows[i], f);
                auto [lo, hi] = std::minmax_element(values.begin(), values.end());
                if (*lo == *hi) continue;
                ++evaluated;

                std::vector<double> sorted = values;
                std::sort(sorted.begin(), sorted.end());
                std::vector<double> thresholds;
                for (int q = 1; q <= 9; ++q) {
                    const double thr = quantile_sorted(sorted, q / 10.0);
                    if (thr < *hi) thresholds.push_back(thr);
                }
                thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                                 thresholds.end());

                for (double thr : thresholds) {
                    std::size_t n_left = 0;
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        goes_left[i] = values[i] <= thr ? 1 : 0;
                        n_left += goes_left[i];
                    }
                    if (n_left < static_cast<std::size_t>(min_leaf) ||
                        rows.size() - n_left < static_cast<std::size_t>(min_leaf))
                        continue;
                    const double stat = log_rank_statistic(d.time, d.event, rows, goes_left);
                    const int fi = static_cast<int>(f);
                    const bool better =
                        stat > best_stat ||
                        (stat == best_stat && best_feature >= 0 &&
                         (fi < best_feature ||
                          (fi == best_feature && thr < best_threshold)));
                    if (better && stat > 0.0) {
                        best_stat = stat;
                        best_feature = fi;
                        best_threshold = thr;
                    }
                }
            }
        }

        if (best_feature < 0) {
            // leaf: local Nelson-Aalen over the node's rows
            std::vector<double> t(rows.size());
            std::vector<int> e(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                t[i] = d.time[rows[i]];
                e[i] = d.event[rows[i]];
            }
            tree.nodes[slot].value = static_cast<double>(curves.size());
            curves.push_back(nelson_aalen(t, e));
            return slot;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows)
            (d.features.at(r, best_feature) <= best_threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const int li = build(std::move(left));
        const int ri = build(std::move(right));
        TreeNode& nd = tree.nodes[slot];
        nd.feature = best_feature;
        nd.threshold = best_threshold;
        nd.gain = best_stat;
        nd.left = li;
        nd.right = ri;
        return slot;
    }
};

} // namespace

RsfModel fit_rsf(const SurvivalData& d, int n_trees, int min_leaf, std::uint64_t seed,
                 bool bootstrap) {
    if (n_trees < 1) throw ArgumentError("fit_rsf: n_trees must be >= 1");
    bool any_event = false;
    for (int e : d.event) any_event = any_event || e == 1;
    if (!any_event) throw TrainingError("fit_rsf: no events");

    RsfModel m;
    m.feature_names = d.feature_names;
    m.event_grid = event_time_grid(d.time, d.event);
    m.trees.resize(n_trees);
    m.leaf_curves.resize(n_trees);

    const std::size_t n = d.features.rows;
    const std::size_t mtry = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d.features.cols)))));

    parallel_for(static_cast<std::size_t>(n_trees), [&](std::size_t ti) {
        Rng rng(derive_seed(seed, ti));
        std::vector<std::size_t> rows(n);
        if (bootstrap) {
            for (std::size_t i = 0; i < n; ++i) rows[i] = rng.index(n);
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        RsfBuilder b{d, std::max(1, min_leaf), mtry, rng, {}, {}};
        b.build(std::move(rows));
        m.trees[ti] = std::move(b.tree);
        m.leaf_curves[ti] = std::move(b.curves);
    });
    return m;
}

std::vector<double> rsf_chf_row(const RsfModel& m, std::span<const double> row,
                                std::span<const double> grid) {
    std::vector<double> acc(grid.size(), 0.0);
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        const int leaf = m.trees[t].leaf_of(row);
        const HazardCurve& curve =
            m.leaf_curves[t][static_cast<std::size_t>(m.trees[t].nodes[leaf].value)];
        for (std::size_t g = 0; g < grid.size(); ++g) acc[g] += curve.at(grid[g]);
    }
    const double inv = 1.0 / static_cast<double>(m.trees.size());
    for (double& v : acc) v *= inv;
    return acc;
}

std::vector<HazardCurve> predict_chf(const RsfModel& m, const Matrix& x,
                                     std::span<const double> grid) {
    if (x.cols != m.feature_names.size()) throw PredictionError("rsf: feature count mismatch");
    std::vector<HazardCurve> out(x.rows);
    parallel_for(x.rows, [&](std::size_t r) {
        out[r].time_grid.assign(grid.begin(), grid.end());
        out[r].chf = rsf_chf_row(m, x.row(r), grid);
    });
    return out;
}

SurvivalAttribution survival_attributions(const RsfModel& model, const Matrix& x,
                                          std::span<const double> time,
                                          std::span<const int> event, const Matrix& background,
                                          std::span<const double> grid, int n_permutations,
                                          int n_perm_repeats, std::uint64_t seed) {
    if (background.rows < 10)
        throw ArgumentError("survival_attributions: need at least 10 background rows");
    const std::size_t d = x.cols;
    const std::size_t ng = grid.size();

    SurvivalAttribution res;
    res.grid.assign(grid.begin(), grid.end());
    res.per_row.resize(x.rows);
    res.per_row_scalar = Matrix(x.rows, d);

    parallel_for(x.rows, [&](std::size_t r) {
        Matrix attr(d, ng);
        std::vector<double> current(d);
        std::vector<std::size_t> order(d);
        for (int k = 0; k < n_permutations; ++k) {
            Rng rng(derive_seed(seed, r * 1000003ULL + static_cast<std::uint64_t>(k)));
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(order);
            const std::size_t b = rng.index(background.rows);
            const auto bg = background.row(b);
            std::copy(bg.begin(), bg.end(), current.begin());
            std::vector<double> prev = rsf_chf_row(model, current, grid);
            for (std::size_t f : order) {
                current[f] = x.at(r, f);
                std::vector<double> next = rsf_chf_row(model, current, grid);
                for (std::size_t g = 0; g < ng; ++g) attr.at(f, g) += next[g] - prev[g];
                prev = std::move(next);
            }
        }
        const double inv = 1.0 / static_cast<double>(n_permutations);
        for (double& v : attr.data) v *= inv;

        for (std::size_t f = 0; f < d; ++f) {
            double area = 0.0;
            if (ng == 1) {
                area = std::fabs(attr.at(f, 0));
            } else {
                for (std::size_t g = 0; g + 1 < ng; ++g)
                    area += 0.5 * (std::fabs(attr.at(f, g)) + std::fabs(attr.at(f, g + 1))) *
                            (grid[g + 1] - grid[g]);
            }
            res.per_row_scalar.at(r, f) = area;
        }
        res.per_row[r] = std::move(attr);
    });

    res.scalar_importance.assign(d, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t f = 0; f < d; ++f)
            res.scalar_importance[f] += res.per_row_scalar.at(r, f);
    for (double& v : res.scalar_importance) v /= static_cast<double>(x.rows);

    // permutation importance of the concordance index; risk = final-grid CHF
    auto risks_of = [&](const Matrix& xm) {
        std::vector<double> risks(xm.rows);
        for (std::size_t r = 0; r < xm.rows; ++r) {
            const auto chf = rsf_chf_row(model, xm.row(r), grid);
            risks[r] = chf.back();
        }
        return risks;
    };
    const auto base_risks = risks_of(x);
    res.baseline_ci = concordance_index(base_risks, time, event);
    res.permutation_importance.assign(d, 0.0);
    res.permutation_sd.assign(d, 0.0);
    parallel_for(d, [&](std::size_t f) {
        std::vector<double> drops(n_perm_repeats);
        for (int rep = 0; rep < n_perm_repeats; ++rep) {
            Rng rng(derive_seed(seed, "perm" + std::to_string(f) + ":" + std::to_string(rep)));
            std::vector<std::size_t> perm(x.rows);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(perm);
            Matrix shuffled = x;
            for (std::size_t r = 0; r < x.rows; ++r) shuffled.at(r, f) = x.at(perm[r], f);
            const auto risks = risks_of(shuffled);
            drops[rep] = res.baseline_ci - concordance_index(risks, time, event);
        }
        res.permutation_importance[f] = mean(drops);
        res.permutation_sd[f] = std::sqrt(sample_variance(drops));
    });
    return res;
}

} // namespace mait
