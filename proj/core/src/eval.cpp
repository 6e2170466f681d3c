#include "mait/eval.hpp"

#include "mait/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mait/error.hpp"
#include "mait/parallel.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

namespace mait {

double auc_score(std::span<const int> y, std::span<const double> p) {
    std::size_t n1 = 0;
    for (int v : y) n1 += v == 1;
    const std::size_t n0 = y.size() - n1;
    if (n0 == 0 || n1 == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto ranks = mid_ranks(p);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == 1) rank_sum += ranks[i];
    const double u = rank_sum - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
    return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

double average_precision(std::span<const int> y, std::span<const double> p) {
    std::size_t n1 = 0;
    for (int v : y) n1 += v == 1;
    if (n1 == 0 || n1 == y.size()) return std::numeric_limits<double>::quiet_NaN();

    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });

    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        // ties share one threshold step
        while (j + 1 < order.size() && p[order[j + 1]] == p[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            if (y[order[k]] == 1) ++tp;
            else ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n1);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    return ap;
}

MetricSet compute_metrics(std::span<const int> y, std::span<const double> p, double threshold) {
    if (y.size() != p.size()) throw ArgumentError("compute_metrics: length mismatch");
    MetricSet m;
    m.threshold = threshold;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool pred = p[i] >= threshold;
        if (y[i] == 1) (pred ? m.tp : m.fn) += 1;
        else (pred ? m.fp : m.tn) += 1;
    }
    const double tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
    const double tn = static_cast<double>(m.tn), fn = static_cast<double>(m.fn);

    const double denom_prod = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    m.mcc = denom_prod > 0.0 ? (tp * tn - fp * fn) / std::sqrt(denom_prod) : 0.0;

    m.sensitivity = (tp + fn) > 0.0 ? tp / (tp + fn) : 0.0;
    m.specificity = (tn + fp) > 0.0 ? tn / (tn + fp) : 0.0;
    m.balanced_accuracy = (m.sensitivity + m.specificity) / 2.0;

    m.ppv_defined = (tp + fp) > 0.0;
    m.ppv = m.ppv_defined ? tp / (tp + fp) : 0.0;
    m.npv_defined = (tn + fn) > 0.0;
    m.npv = m.npv_defined ? tn / (tn + fn) : 0.0;
    m.f1_defined = (2.0 * tp + fp + fn) > 0.0;
    m.f1 = m.f1_defined ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;

    double brier = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = p[i] - static_cast<double>(y[i]);
        brier += d * d;
    }
    m.brier = y.empty() ? 0.0 : brier / static_cast<double>(y.size());

    m.auc = auc_score(y, p);
    m.auc_defined = !std::isnan(m.auc);
    m.pr_auc = average_precision(y, p);
    m.pr_auc_defined = !std::isnan(m.pr_auc);
    return m;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> y, int k,
                                                       std::uint64_t seed) {
    if (k < 2) throw ArgumentError("stratified_folds: k must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
    if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k))
        throw DataError("stratified_folds: a class has fewer members than folds");

    std::vector<std::vector<std::size_t>> folds(k);
    int cls = 0;
    for (auto* group : {&neg, &pos}) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls++)));
        rng.shuffle(*group);
        for (std::size_t i = 0; i < group->size(); ++i)
            folds[i % k].push_back((*group)[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

namespace {

double objective_score(Objective obj, std::span<const int> y, std::span<const double> p) {
    return obj == Objective::Auc ? auc_score(y, p) : average_precision(y, p);
}

template <class T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> idx) {
    std::vector<T> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

} // namespace

SearchResult random_search(Algorithm algorithm, const Matrix& x, std::span<const int> y,
                           std::span<const double> weights, int n_iter, int inner_k,
                           Objective objective, std::uint64_t seed) {
    if (n_iter < 1) throw ArgumentError("random_search: n_iter must be >= 1");
    const auto folds = stratified_folds(y, inner_k, derive_seed(seed, "inner_folds"));

    // precompute fold complements
    std::vector<std::vector<std::size_t>> train_parts(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::uint8_t> in_fold(y.size(), 0);
        for (std::size_t i : folds[f]) in_fold[i] = 1;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (!in_fold[i]) train_parts[f].push_back(i);
    }

    SearchResult res;
    res.candidates.resize(n_iter);
    res.scores.assign(n_iter, 0.0);

    parallel_for(static_cast<std::size_t>(n_iter), [&](std::size_t i) {
        const ModelSpec spec = sample_spec(algorithm, x.rows, x.cols, derive_seed(seed, i));
        double total = 0.0;
        int counted = 0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const Matrix xt = x.take_rows(train_parts[f]);
            const auto yt = take<int>(y, train_parts[f]);
            const auto wt = take<double>(weights, train_parts[f]);
            const auto model = fit_classifier(spec, xt, yt, wt);
            const Matrix xv = x.take_rows(folds[f]);
            const auto yv = take<int>(y, folds[f]);
            const auto pv = predict_proba(model, xv);
            const double s = objective_score(objective, yv, pv);
            if (!std::isnan(s)) {
                total += s;
                ++counted;
            }
        }
        res.candidates[i] = spec;
        res.scores[i] = counted ? total / counted : 0.0;
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < res.scores.size(); ++i)
        if (res.scores[i] > res.scores[best]) best = i; // ties keep the earliest
    res.best = res.candidates[best];
    res.best_score = res.scores[best];
    return res;
}

double minority_fraction(std::span<const int> y) {
    std::size_t n1 = 0;
    for (int v : y) n1 += v == 1;
    const std::size_t minority = std::min(n1, y.size() - n1);
    return y.empty() ? 0.0 : static_cast<double>(minority) / static_cast<double>(y.size());
}

ThresholdTrace tune_threshold(const std::vector<FoldPredictions>& folds, double initial) {
    ThresholdTrace trace;
    trace.initial = initial;
    std::vector<double> history;
    for (const auto& fold : folds) {
        trace.applied.push_back(history.empty() ? initial : median_of(history));
        double s0 = 0.0, s1 = 0.0;
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < fold.y.size(); ++i) {
            if (fold.y[i] == 1) {
                s1 += fold.p[i];
                ++n1;
            } else {
                s0 += fold.p[i];
                ++n0;
            }
        }
        if (n0 == 0 || n1 == 0) {
            trace.estimates.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double est = (s0 / n0 + s1 / n1) / 2.0;
        trace.estimates.push_back(est);
        history.push_back(est);
    }
    trace.final_threshold = history.empty() ? initial : median_of(history);
    return trace;
}

CVResult cross_validate(const std::vector<Algorithm>& candidates, const Matrix& x,
                        std::span<const int> y, const CVOptions& options) {
    if (candidates.empty()) throw ArgumentError("cross_validate: no candidates");
    CVResult result;
    result.fold_indices = stratified_folds(y, options.k_folds, derive_seed(options.seed, "folds"));

    const double initial_threshold =
        options.threshold_tuning ? minority_fraction(y) : options.fixed_threshold;

    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        CandidateResult cand;
        cand.algorithm = candidates[ci];

        std::vector<FoldPredictions> fold_preds;
        for (std::size_t f = 0; f < result.fold_indices.size(); ++f) {
            FoldRecord rec;
            rec.holdout = result.fold_indices[f];
            std::vector<std::size_t> train_idx;
            std::vector<std::uint8_t> in_fold(y.size(), 0);
            for (std::size_t i : rec.holdout) in_fold[i] = 1;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (!in_fold[i]) train_idx.push_back(i);

            const Matrix xt = x.take_rows(train_idx);
            std::vector<int> yt(train_idx.size());
            for (std::size_t i = 0; i < train_idx.size(); ++i) yt[i] = y[train_idx[i]];

            const ClassWeights cw = class_weights(yt);
            std::vector<double> wt(yt.size());
            for (std::size_t i = 0; i < yt.size(); ++i) wt[i] = cw.at(yt[i]);

            const std::uint64_t fold_seed =
                derive_seed(options.seed, (ci << 16) | (f + 1));
            ModelSpec spec;
            if (options.tuning_enabled) {
                spec = random_search(cand.algorithm, xt, yt, wt, options.n_search_iter,
                                     options.inner_folds, options.objective, fold_seed)
                           .best;
            } else {
                spec = default_spec(cand.algorithm, fold_seed);
            }
            spec.seed = derive_seed(fold_seed, "fit");
            TrainedModel model;
            if (options.oversample) {
                const auto os = random_oversample(xt, yt, derive_seed(fold_seed, "oversample"));
                const ClassWeights ow = class_weights(os.y);
                std::vector<double> wo(os.y.size());
                for (std::size_t i = 0; i < os.y.size(); ++i) wo[i] = ow.at(os.y[i]);
                model = fit_classifier(spec, os.x, os.y, wo);
            } else {
                model = fit_classifier(spec, xt, yt, wt);
            }

            const Matrix xv = x.take_rows(rec.holdout);
            rec.p = predict_proba(model, xv);
            rec.y.resize(rec.holdout.size());
            for (std::size_t i = 0; i < rec.holdout.size(); ++i) rec.y[i] = y[rec.holdout[i]];
            rec.tuned_spec = spec;
            fold_preds.push_back({rec.p, rec.y});
            cand.folds.push_back(std::move(rec));
        }

        if (options.threshold_tuning) {
            cand.trace = tune_threshold(fold_preds, initial_threshold);
        } else {
            cand.trace.initial = initial_threshold;
            cand.trace.applied.assign(fold_preds.size(), options.fixed_threshold);
            cand.trace.estimates.assign(fold_preds.size(),
                                        std::numeric_limits<double>::quiet_NaN());
            cand.trace.final_threshold = options.fixed_threshold;
        }

        double grand = 0.0;
        for (std::size_t f = 0; f < cand.folds.size(); ++f) {
            FoldRecord& rec = cand.folds[f];
            rec.applied_threshold = cand.trace.applied[f];
            rec.threshold_estimate = cand.trace.estimates[f];
            rec.metrics = compute_metrics(rec.y, rec.p, rec.applied_threshold);
            grand += (rec.metrics.mcc + rec.metrics.auc + rec.metrics.pr_auc) / 3.0;
        }
        cand.grand_average = grand / static_cast<double>(cand.folds.size());
        result.candidates.push_back(std::move(cand));
    }
    return result;
}

Algorithm select_best(const CVResult& r) {
    if (r.candidates.empty()) throw ArgumentError("select_best: empty CVResult");
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.candidates.size(); ++i)
        if (r.candidates[i].grand_average > r.candidates[best].grand_average) best = i;
    return r.candidates[best].algorithm;
}

IsotonicMap IsotonicMap::fit(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size()) throw ArgumentError("isotonic_calibrate: length mismatch");
    if (p.size() < 2) throw DataError("isotonic_calibrate: need at least 2 points");

    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

    // pool exact ties so the fit is a function of p
    struct Block {
        double x;
        double sum;
        double weight;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < order.size() && p[order[j]] == p[order[i]]) {
            sum += static_cast<double>(y[order[j]]);
            ++j;
        }
        blocks.push_back({p[order[i]], sum, static_cast<double>(j - i)});
        i = j;
    }

    // PAVA: merge while a predecessor mean exceeds the successor mean
    struct Pool {
        double sum;
        double weight;
        std::size_t span; // how many x-knots it covers
    };
    std::vector<Pool> pools;
    std::vector<double> xs;
    for (const auto& b : blocks) {
        xs.push_back(b.x);
        pools.push_back({b.sum, b.weight, 1});
        while (pools.size() > 1) {
            const auto& prev = pools[pools.size() - 2];
            const auto& cur = pools.back();
            if (prev.sum / prev.weight <= cur.sum / cur.weight) break;
            Pool merged{prev.sum + cur.sum, prev.weight + cur.weight, prev.span + cur.span};
            pools.pop_back();
            pools.back() = merged;
        }
    }

    IsotonicMap map;
    map.x_ = std::move(xs);
    map.y_.reserve(map.x_.size());
    for (const auto& pool : pools) {
        const double v = pool.sum / pool.weight;
        for (std::size_t i = 0; i < pool.span; ++i) map.y_.push_back(v);
    }
    return map;
}

double IsotonicMap::apply(double p) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), p);
    const double v = it == x_.begin() ? y_.front() : y_[(it - x_.begin()) - 1];
    return std::clamp(v, 0.0, 1.0);
}

std::vector<double> IsotonicMap::apply(std::span<const double> p) const {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = apply(p[i]);
    return out;
}

double conformal_quantile(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw DataError("conformal_quantile: empty calibration set");
    std::sort(scores.begin(), scores.end());
    const std::size_t n = scores.size();
    const double raw = std::ceil((static_cast<double>(n) + 1.0) * (1.0 - alpha));
    const std::size_t idx = static_cast<std::size_t>(std::max(1.0, raw));
    if (idx > n) return 1.0;
    return scores[idx - 1];
}

std::vector<double> conformal_scores(std::span<const double> p1, std::span<const int> y) {
    std::vector<double> s(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i)
        s[i] = 1.0 - (y[i] == 1 ? p1[i] : 1.0 - p1[i]);
    return s;
}

LabelSet conformal_set(double qhat, double p1) {
    LabelSet set;
    set.has1 = 1.0 - p1 <= qhat;
    set.has0 = p1 <= qhat;
    return set;
}

NetBenefitCurve net_benefit_curve(std::span<const int> y, std::span<const double> p,
                                  std::span<const double> grid, double harm_weight) {
    for (double pt : grid)
        if (!(pt > 0.0 && pt < 1.0))
            throw ArgumentError("net_benefit_curve: grid must lie strictly inside (0,1)");
    const double n = static_cast<double>(y.size());
    std::size_t n1 = 0;
    for (int v : y) n1 += v == 1;
    const double prev = n1 / n;

    NetBenefitCurve c;
    c.grid.assign(grid.begin(), grid.end());
    c.harm_weight = harm_weight;
    for (double pt : grid) {
        const double odds = pt / (1.0 - pt);
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (p[i] >= pt) (y[i] == 1 ? tp : fp) += 1;
        }
        c.model.push_back(tp / n - harm_weight * (fp / n) * odds);
        c.treat_all.push_back(prev - harm_weight * (1.0 - prev) * odds);
        c.treat_none.push_back(0.0);
        // y-independent fair-coin classifier, in expectation
        c.random_classifier.push_back(0.5 * prev - harm_weight * 0.5 * (1.0 - prev) * odds);
    }
    return c;
}

FilterResult uncertainty_filter(std::span<const double> p, std::span<const double> shap_l1,
                                double prob_band, double shap_quantile, bool combine_and) {
    if (p.size() != shap_l1.size()) throw ArgumentError("uncertainty_filter: length mismatch");
    FilterResult res;
    if (p.empty()) return res;
    const double tau = quantile(shap_l1, shap_quantile);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool near_chance = std::fabs(p[i] - 0.5) <= prob_band;
        const bool weak_attr = shap_l1[i] <= tau;
        const bool discard = combine_and ? (near_chance && weak_attr) : (near_chance || weak_attr);
        if (!discard) {
            res.kept.push_back(i);
            continue;
        }
        res.discarded.push_back(i);
        std::string reason;
        if (near_chance) reason += "probability within " + fmt_num(prob_band) + " of 0.5";
        if (weak_attr) {
            if (!reason.empty()) reason += "; ";
            reason += "attribution L1 norm at or below the " + fmt_num(shap_quantile) +
                      " quantile";
        }
        res.reasons.push_back(std::move(reason));
    }
    return res;
}

} // namespace mait
