#include "mait/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mait/error.hpp"
#include "mait/parallel.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

namespace mait {

std::vector<double> ShapMatrix::row_l1() const {
    std::vector<double> out(values.rows, 0.0);
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c) out[r] += std::fabs(values.at(r, c));
    return out;
}

ShapMatrix linear_shap(const TrainedModel& model, const Matrix& x,
                       std::span<const double> background_means) {
    if (model.spec.algorithm != Algorithm::LogRegL1 &&
        model.spec.algorithm != Algorithm::LinearReg)
        throw ArgumentError("linear_shap: model is not linear");
    if (background_means.size() != model.coefficients.size())
        throw ArgumentError("linear_shap: background mean length mismatch");

    ShapMatrix shap;
    shap.feature_names = model.feature_names;
    shap.scale = ShapMatrix::Scale::Margin;
    shap.values = Matrix(x.rows, x.cols);
    double base = model.intercept;
    for (std::size_t c = 0; c < x.cols; ++c)
        base += model.coefficients[c] * background_means[c];
    shap.base_value = base;
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c)
            shap.values.at(r, c) = model.coefficients[c] * (x.at(r, c) - background_means[c]);
    return shap;
}

ShapMatrix mc_shapley(const TrainedModel& model, const Matrix& x, const Matrix& background,
                      int n_orderings, std::uint64_t seed) {
    if (background.rows < 10)
        throw ArgumentError("mc_shapley: need at least 10 background rows");
    if (n_orderings < 1) throw ArgumentError("mc_shapley: n_orderings must be >= 1");
    const std::size_t d = x.cols;

    ShapMatrix shap;
    shap.feature_names = model.feature_names;
    shap.scale = ShapMatrix::Scale::Margin;
    if (model.spec.algorithm == Algorithm::RandomForest)
        shap.scale = ShapMatrix::Scale::Probability;
    shap.values = Matrix(x.rows, d);
    shap.se = Matrix(x.rows, d);

    const auto bg_margins = predict_margin(model, background);
    shap.base_value = mean(bg_margins);

    auto margin_of = [&](std::span<const double> row) {
        Matrix one(1, d);
        std::copy(row.begin(), row.end(), one.row(0).begin());
        return predict_margin(model, one)[0];
    };

    parallel_for(x.rows, [&](std::size_t r) {
        std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
        std::vector<double> current(d);
        std::vector<std::size_t> order(d);
        for (int k = 0; k < n_orderings; ++k) {
            Rng rng(derive_seed(seed, r * 1000003ULL + static_cast<std::uint64_t>(k)));
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(order);
            // round-robin background keeps the sampled base aligned with the
            // full background mean
            const std::size_t b = static_cast<std::size_t>(k) % background.rows;
            const auto bg = background.row(b);
            std::copy(bg.begin(), bg.end(), current.begin());
            double prev = margin_of(current);
            for (std::size_t f : order) {
                current[f] = x.at(r, f);
                const double next = margin_of(current);
                const double marginal = next - prev;
                sum[f] += marginal;
                sumsq[f] += marginal * marginal;
                prev = next;
            }
        }
        const double k = static_cast<double>(n_orderings);
        for (std::size_t f = 0; f < d; ++f) {
            const double m = sum[f] / k;
            shap.values.at(r, f) = m;
            const double var = n_orderings > 1 ? (sumsq[f] - k * m * m) / (k - 1.0) : 0.0;
            shap.se.at(r, f) = std::sqrt(std::max(0.0, var) / k);
        }
    });
    return shap;
}

ShapMatrix attributions_for(const TrainedModel& model, const Matrix& x, const Matrix& background,
                            int n_orderings, std::uint64_t seed) {
    if (model.is_tree_model()) return tree_shap(model, x);
    if (model.spec.algorithm == Algorithm::LogRegL1 ||
        model.spec.algorithm == Algorithm::LinearReg) {
        std::vector<double> means(background.cols, 0.0);
        for (std::size_t c = 0; c < background.cols; ++c) means[c] = mean(background.column(c));
        return linear_shap(model, x, means);
    }
    return mc_shapley(model, x, background, n_orderings, seed);
}

namespace {

double metric_value(ImportanceMetric metric, std::span<const int> y, std::span<const double> p,
                    double threshold) {
    if (metric == ImportanceMetric::Auc) return auc_score(y, p);
    return compute_metrics(y, p, threshold).mcc;
}

std::vector<double> scores_for(const TrainedModel& model, const Matrix& x) {
    return model.is_classifier() ? predict_proba(model, x) : predict_value(model, x);
}

} // namespace

PermutationImportance permutation_importance(const TrainedModel& model, const Matrix& x,
                                             std::span<const int> y, ImportanceMetric metric,
                                             int n_repeats, std::uint64_t seed,
                                             double threshold) {
    if (n_repeats < 1) throw ArgumentError("permutation_importance: n_repeats must be >= 1");
    PermutationImportance res;
    res.baseline = metric_value(metric, y, scores_for(model, x), threshold);
    res.mean_drop.assign(x.cols, 0.0);
    res.sd.assign(x.cols, 0.0);

    parallel_for(x.cols, [&](std::size_t f) {
        std::vector<double> drops(n_repeats);
        for (int rep = 0; rep < n_repeats; ++rep) {
            Rng rng(derive_seed(seed, f * 10007ULL + static_cast<std::uint64_t>(rep)));
            std::vector<std::size_t> perm(x.rows);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(perm);
            Matrix shuffled = x;
            for (std::size_t r = 0; r < x.rows; ++r) shuffled.at(r, f) = x.at(perm[r], f);
            drops[rep] =
                res.baseline - metric_value(metric, y, scores_for(model, shuffled), threshold);
        }
        res.mean_drop[f] = mean(drops);
        res.sd[f] = std::sqrt(sample_variance(drops));
    });
    return res;
}

std::vector<PairInteraction> pair_interactions(const TrainedModel& model, const Matrix& x,
                                               std::span<const int> y, ImportanceMetric metric,
                                               int n_repeats, std::uint64_t seed,
                                               double threshold) {
    const std::size_t d = x.cols;
    const double baseline = metric_value(metric, y, scores_for(model, x), threshold);

    std::vector<PairInteraction> pairs;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) pairs.push_back({i, j, 0.0});

    for (int rep = 0; rep < n_repeats; ++rep) {
        Rng rng(derive_seed(seed, "pair_perm" + std::to_string(rep)));
        std::vector<std::size_t> perm(x.rows);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);

        std::vector<double> single_drop(d);
        parallel_for(d, [&](std::size_t f) {
            Matrix shuffled = x;
            for (std::size_t r = 0; r < x.rows; ++r) shuffled.at(r, f) = x.at(perm[r], f);
            single_drop[f] =
                baseline - metric_value(metric, y, scores_for(model, shuffled), threshold);
        });
        parallel_for(pairs.size(), [&](std::size_t pi) {
            auto& pr = pairs[pi];
            Matrix shuffled = x;
            for (std::size_t r = 0; r < x.rows; ++r) {
                shuffled.at(r, pr.i) = x.at(perm[r], pr.i);
                shuffled.at(r, pr.j) = x.at(perm[r], pr.j);
            }
            const double joint =
                baseline - metric_value(metric, y, scores_for(model, shuffled), threshold);
            // a pair that carries joint signal loses less when destroyed once
            // than twice: interacting pairs come out positive
            pr.score += single_drop[pr.i] + single_drop[pr.j] - joint;
        });
    }
    for (auto& pr : pairs) pr.score /= static_cast<double>(n_repeats);
    return pairs;
}

SignificanceResult shap_significance(const ShapMatrix& shap, int n_bootstrap,
                                     std::uint64_t seed) {
    if (n_bootstrap < 20) throw ArgumentError("shap_significance: n_bootstrap must be >= 20");
    const std::size_t rows = shap.values.rows, d = shap.values.cols;

    SignificanceResult res;
    double total = 0.0;
    for (double v : shap.values.data) total += std::fabs(v);
    res.tau = shap.values.data.empty() ? 0.0 : total / static_cast<double>(rows * d);

    res.median_abs.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> a(rows);
        for (std::size_t r = 0; r < rows; ++r) a[r] = std::fabs(shap.values.at(r, f));
        std::sort(a.begin(), a.end());
        res.median_abs[f] = quantile_sorted(a, 0.5);
    }

    std::vector<std::size_t> crossing(d, 0);
    for (int b = 0; b < n_bootstrap; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<std::size_t> idx(rows);
        for (std::size_t i = 0; i < rows; ++i) idx[i] = rng.index(rows);
        for (std::size_t f = 0; f < d; ++f) {
            std::vector<double> a(rows);
            for (std::size_t i = 0; i < rows; ++i) a[i] = std::fabs(shap.values.at(idx[i], f));
            std::sort(a.begin(), a.end());
            const double q25 = quantile_sorted(a, 0.25);
            const double q75 = quantile_sorted(a, 0.75);
            if (q25 <= res.tau && res.tau <= q75) ++crossing[f];
        }
    }
    res.crossing_fraction.resize(d);
    res.significant.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
        res.crossing_fraction[f] =
            static_cast<double>(crossing[f]) / static_cast<double>(n_bootstrap);
        res.significant[f] =
            res.crossing_fraction[f] < 0.05 && res.median_abs[f] > res.tau ? 1 : 0;
    }
    return res;
}

ClusterResult shap_clusters(const ShapMatrix& shap, std::span<const int> y,
                            std::span<const double> p, double threshold, int k_min, int k_max,
                            std::uint64_t seed) {
    const std::size_t rows = shap.values.rows;
    if (k_min < 1 || k_max < k_min) throw ArgumentError("shap_clusters: bad k range");
    if (rows < static_cast<std::size_t>(k_max))
        throw ArgumentError("shap_clusters: fewer rows than max k");

    ClusterResult res;

    bool all_identical = true;
    for (std::size_t r = 1; r < rows && all_identical; ++r)
        for (std::size_t c = 0; c < shap.values.cols; ++c)
            if (shap.values.at(r, c) != shap.values.at(0, c)) {
                all_identical = false;
                break;
            }
    if (all_identical) {
        res.degenerate = true;
        res.chosen_k = 1;
        res.labels.assign(rows, 0);
    } else if (k_min == k_max) {
        res.chosen_k = k_min;
        res.labels = kmeans(shap.values, k_min, 10, 300, 1e-6, derive_seed(seed, k_min)).labels;
        res.tried_k.push_back(k_min);
        res.silhouettes.push_back(
            k_min > 1 ? mean_silhouette(shap.values, res.labels, k_min) : 0.0);
    } else {
        double best_sil = -2.0;
        for (int k = k_min; k <= k_max; ++k) {
            const auto km = kmeans(shap.values, k, 10, 300, 1e-6, derive_seed(seed, k));
            const double sil = mean_silhouette(shap.values, km.labels, k);
            res.tried_k.push_back(k);
            res.silhouettes.push_back(sil);
            if (sil > best_sil) {
                best_sil = sil;
                res.chosen_k = k;
                res.labels = km.labels;
            }
        }
    }

    const std::size_t k = static_cast<std::size_t>(res.chosen_k);
    res.per_cluster_importance = Matrix(k, shap.values.cols);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto c = static_cast<std::size_t>(res.labels[r]);
        ++counts[c];
        for (std::size_t f = 0; f < shap.values.cols; ++f)
            res.per_cluster_importance.at(c, f) += std::fabs(shap.values.at(r, f));
    }
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c])
            for (std::size_t f = 0; f < shap.values.cols; ++f)
                res.per_cluster_importance.at(c, f) /= static_cast<double>(counts[c]);

    for (std::size_t c = 0; c < k; ++c) {
        std::vector<int> yc;
        std::vector<double> pc;
        for (std::size_t r = 0; r < rows; ++r) {
            if (static_cast<std::size_t>(res.labels[r]) != c) continue;
            yc.push_back(y[r]);
            pc.push_back(p[r]);
        }
        res.per_cluster_metrics.push_back(compute_metrics(yc, pc, threshold));
    }
    return res;
}

CorrectOnlyImportance correct_only_importance(const ShapMatrix& shap, std::span<const int> y,
                                              std::span<const double> p, double threshold) {
    CorrectOnlyImportance res;
    res.mean_abs.assign(shap.values.cols, 0.0);
    for (std::size_t r = 0; r < shap.values.rows; ++r) {
        const int predicted = p[r] >= threshold ? 1 : 0;
        if (predicted != y[r]) continue;
        ++res.correct_rows;
        for (std::size_t f = 0; f < shap.values.cols; ++f)
            res.mean_abs[f] += std::fabs(shap.values.at(r, f));
    }
    if (res.correct_rows == 0) {
        res.defined = false;
        res.mean_abs.assign(shap.values.cols, std::numeric_limits<double>::quiet_NaN());
        return res;
    }
    res.defined = true;
    for (double& v : res.mean_abs) v /= static_cast<double>(res.correct_rows);
    return res;
}

ImportanceTable unify_importance(
    const std::vector<std::pair<std::string, std::vector<double>>>& method_scores,
    const std::vector<std::string>& features) {
    if (method_scores.empty()) throw ArgumentError("unify_importance: no methods");
    for (const auto& [name, scores] : method_scores)
        if (scores.size() != features.size())
            throw ArgumentError("unify_importance: method \"" + name +
                                "\" has mismatched feature count");

    ImportanceTable t;
    t.features = features;
    const std::size_t m = method_scores.size(), d = features.size();
    t.raw = Matrix(m, d);
    t.normalized = Matrix(m, d);
    t.constant_method.assign(m, 0);

    for (std::size_t i = 0; i < m; ++i) {
        t.methods.push_back(method_scores[i].first);
        const auto& s = method_scores[i].second;
        const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
        const double lo = *lo_it, hi = *hi_it;
        for (std::size_t f = 0; f < d; ++f) {
            t.raw.at(i, f) = s[f];
            t.normalized.at(i, f) = hi > lo ? (s[f] - lo) / (hi - lo) : 0.0;
        }
        if (!(hi > lo)) t.constant_method[i] = 1;
    }

    t.unified.assign(d, 0.0);
    for (std::size_t f = 0; f < d; ++f) {
        for (std::size_t i = 0; i < m; ++i) t.unified[f] += t.normalized.at(i, f);
        t.unified[f] /= static_cast<double>(m);
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (t.unified[a] != t.unified[b]) return t.unified[a] > t.unified[b];
        return features[a] < features[b];
    });
    t.rank.assign(d, 0);
    for (std::size_t i = 0; i < d; ++i) t.rank[order[i]] = i + 1;
    return t;
}

} // namespace mait
