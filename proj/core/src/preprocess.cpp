#include "mait/preprocess.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mait/error.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

namespace mait {

RareMergeState fit_rare_merge(const Table& t, double min_fraction, const std::string& fit_split) {
    RareMergeState s;
    s.min_fraction = min_fraction;
    s.provenance = {"rare_merge", fit_split, t.row_count()};
    for (const auto& col : t.columns()) {
        if (col.spec.kind != ColumnKind::Categorical) continue;
        std::map<std::string, std::size_t> counts;
        std::size_t observed = 0;
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            if (col.missing[r]) continue;
            ++counts[col.cat[r]];
            ++observed;
        }
        std::set<std::string> kept;
        for (const auto& [cat, cnt] : counts) {
            if (observed && static_cast<double>(cnt) / observed >= min_fraction) kept.insert(cat);
        }
        s.kept[col.spec.name] = std::move(kept);
    }
    return s;
}

Table apply_rare_merge(const RareMergeState& s, const Table& t) {
    Table out = t;
    for (auto& col : out.columns()) {
        if (col.spec.kind != ColumnKind::Categorical) continue;
        auto it = s.kept.find(col.spec.name);
        if (it == s.kept.end()) continue;
        for (std::size_t r = 0; r < out.row_count(); ++r) {
            if (col.missing[r]) continue;
            if (!it->second.count(col.cat[r])) col.cat[r] = "OTHER";
        }
    }
    return out;
}

OneHotState fit_one_hot(const Table& t, const std::string& fit_split) {
    OneHotState s;
    s.provenance = {"one_hot", fit_split, t.row_count()};
    for (const auto& col : t.columns()) {
        if (col.spec.kind != ColumnKind::Categorical) continue;
        std::set<std::string> vocab;
        for (std::size_t r = 0; r < t.row_count(); ++r)
            if (!col.missing[r]) vocab.insert(col.cat[r]);
        s.vocabularies.emplace_back(col.spec.name,
                                    std::vector<std::string>(vocab.begin(), vocab.end()));
    }
    return s;
}

Table apply_one_hot(const OneHotState& s, const Table& t) {
    const std::size_t n = t.row_count();
    std::vector<ColumnSpec> specs;
    for (const auto& col : t.columns())
        if (col.spec.kind != ColumnKind::Categorical) specs.push_back(col.spec);
    for (const auto& [name, vocab] : s.vocabularies)
        for (const auto& cat : vocab)
            specs.push_back({name + "=" + cat, ColumnKind::Continuous, {}});

    Table out(specs, n);
    std::size_t oc = 0;
    for (const auto& col : t.columns()) {
        if (col.spec.kind == ColumnKind::Categorical) continue;
        out.column(oc).num = col.num;
        out.column(oc).cat = col.cat;
        out.column(oc).missing = col.missing;
        ++oc;
    }
    for (const auto& [name, vocab] : s.vocabularies) {
        const Column& src = t.column(name);
        for (const auto& cat : vocab) {
            Column& dst = out.column(oc++);
            for (std::size_t r = 0; r < n; ++r) {
                // MISSING and unseen categories encode as an all-zero block
                dst.num[r] = (!src.missing[r] && src.cat[r] == cat) ? 1.0 : 0.0;
            }
        }
    }
    return out;
}

namespace {

std::vector<std::size_t> continuous_indices(const Table& t) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < t.column_count(); ++i)
        if (t.column(i).spec.kind == ColumnKind::Continuous) idx.push_back(i);
    return idx;
}

} // namespace

KnnImputeState fit_knn_impute(const Table& t, int k, const std::string& fit_split) {
    if (k < 1) throw ArgumentError("fit_knn_impute: k must be >= 1");
    KnnImputeState s;
    s.k = k;
    s.provenance = {"knn_impute", fit_split, t.row_count()};
    const auto idx = continuous_indices(t);
    s.donor_rows = t.row_count();
    s.donor_values.resize(t.row_count() * idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Column& c = t.column(idx[j]);
        s.feature_names.push_back(c.spec.name);
        bool any = false;
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            s.donor_values[r * idx.size() + j] = c.missing[r] ? kMissing : c.num[r];
            any = any || !c.missing[r];
        }
        if (!any)
            throw TrainingError("fit_knn_impute: column \"" + c.spec.name +
                                "\" is entirely missing in training data");
    }
    return s;
}

Table apply_knn_impute(const KnnImputeState& s, const Table& t) {
    Table out = t;
    const std::size_t d_total = s.feature_names.size();
    if (d_total == 0) return out;

    std::vector<std::size_t> col_index(d_total);
    for (std::size_t j = 0; j < d_total; ++j) {
        auto ci = t.find_column(s.feature_names[j]);
        if (!ci) throw DataError("apply_knn_impute: column \"" + s.feature_names[j] + "\" absent");
        col_index[j] = *ci;
    }

    auto donor = [&](std::size_t r, std::size_t j) { return s.donor_values[r * d_total + j]; };

    for (std::size_t r = 0; r < t.row_count(); ++r) {
        // original row snapshot: imputation never reads imputed cells
        std::vector<double> row(d_total);
        bool any_missing = false;
        for (std::size_t j = 0; j < d_total; ++j) {
            const Column& c = t.column(col_index[j]);
            row[j] = c.missing[r] ? kMissing : c.num[r];
            any_missing = any_missing || c.missing[r];
        }
        if (!any_missing) continue;

        for (std::size_t j = 0; j < d_total; ++j) {
            if (!is_missing(row[j])) continue;
            // rank donors that observe column j by rescaled partial distance
            std::vector<std::pair<double, std::size_t>> ranked;
            for (std::size_t dr = 0; dr < s.donor_rows; ++dr) {
                if (is_missing(donor(dr, j))) continue;
                double ss = 0.0;
                std::size_t shared = 0;
                for (std::size_t c = 0; c < d_total; ++c) {
                    if (is_missing(row[c]) || is_missing(donor(dr, c))) continue;
                    const double diff = row[c] - donor(dr, c);
                    ss += diff * diff;
                    ++shared;
                }
                if (shared == 0) continue;
                const double dist =
                    std::sqrt(ss) * std::sqrt(static_cast<double>(d_total) / shared);
                ranked.emplace_back(dist, dr);
            }
            if (ranked.empty())
                throw DataError("apply_knn_impute: no usable donor for column \"" +
                                s.feature_names[j] + "\"");
            std::sort(ranked.begin(), ranked.end());
            const std::size_t take = std::min<std::size_t>(s.k, ranked.size());
            double sum = 0.0;
            for (std::size_t i = 0; i < take; ++i) sum += donor(ranked[i].second, j);
            Column& c = out.column(col_index[j]);
            c.num[r] = sum / static_cast<double>(take);
            c.missing[r] = 0;
        }
    }
    return out;
}

RobustScaleState fit_robust_scale(const Table& t, const std::string& fit_split) {
    RobustScaleState s;
    s.provenance = {"robust_scale", fit_split, t.row_count()};
    for (const auto& col : t.columns()) {
        if (col.spec.kind != ColumnKind::Continuous) continue;
        std::vector<double> obs;
        for (std::size_t r = 0; r < t.row_count(); ++r)
            if (!col.missing[r]) obs.push_back(col.num[r]);
        std::sort(obs.begin(), obs.end());
        if (obs.empty()) throw TrainingError("fit_robust_scale: column \"" + col.spec.name +
                                             "\" has no observed values");
        const double med = quantile_sorted(obs, 0.5);
        const double iqr = quantile_sorted(obs, 0.75) - quantile_sorted(obs, 0.25);
        s.names.push_back(col.spec.name);
        s.median.push_back(med);
        s.iqr.push_back(iqr);
        s.flagged.push_back(iqr == 0.0 ? 1 : 0);
    }
    return s;
}

Table apply_robust_scale(const RobustScaleState& s, const Table& t) {
    Table out = t;
    for (std::size_t j = 0; j < s.names.size(); ++j) {
        if (s.flagged[j]) continue;
        Column& c = out.column(s.names[j]);
        for (std::size_t r = 0; r < out.row_count(); ++r) {
            if (c.missing[r]) continue;
            c.num[r] = (c.num[r] - s.median[j]) / s.iqr[j];
        }
    }
    return out;
}

double median_pairwise_distance(const Matrix& x) {
    std::vector<double> dists;
    dists.reserve(x.rows * (x.rows - 1) / 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = i + 1; j < x.rows; ++j) {
            double ss = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double d = x.at(i, c) - x.at(j, c);
                ss += d * d;
            }
            dists.push_back(std::sqrt(ss));
        }
    }
    if (dists.empty()) return 1.0;
    return quantile(dists, 0.5);
}

PropagationResult propagate_labels(const Matrix& x, std::span<const int> y, double sigma,
                                   int max_iter, double tol) {
    if (sigma <= 0.0) throw ArgumentError("propagate_labels: sigma must be positive");
    const std::size_t n = x.rows;
    if (y.size() != n) throw ArgumentError("propagate_labels: label length mismatch");

    std::vector<int> classes;
    for (int v : y)
        if (v != kUnknownLabel &&
            std::find(classes.begin(), classes.end(), v) == classes.end())
            classes.push_back(v);
    std::sort(classes.begin(), classes.end());
    if (classes.size() < 2)
        throw DataError("propagate_labels: need at least one known label per class");
    const std::size_t nc = classes.size();
    auto class_index = [&](int v) {
        return static_cast<std::size_t>(
            std::find(classes.begin(), classes.end(), v) - classes.begin());
    };

    Eigen::MatrixXd w(n, n);
    const double denom = 2.0 * sigma * sigma;
    for (std::size_t i = 0; i < n; ++i) {
        w(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double ss = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double d = x.at(i, c) - x.at(j, c);
                ss += d * d;
            }
            const double a = std::exp(-ss / denom);
            w(i, j) = a;
            w(j, i) = a;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double rs = w.row(i).sum();
        if (rs > 0.0) w.row(i) /= rs;
    }

    Eigen::MatrixXd f(n, nc);
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] == kUnknownLabel) {
            f.row(i).setConstant(1.0 / static_cast<double>(nc));
        } else {
            f.row(i).setZero();
            f(i, class_index(y[i])) = 1.0;
        }
    }

    PropagationResult res;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        Eigen::MatrixXd next = w * f;
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i] != kUnknownLabel) {
                next.row(i).setZero();
                next(i, class_index(y[i])) = 1.0;
            }
        }
        const double delta = (next - f).cwiseAbs().maxCoeff();
        f = std::move(next);
        if (delta < tol) {
            ++iter;
            break;
        }
    }
    res.iterations = iter;
    res.labels.resize(n);
    res.confidence.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        const double conf = f.row(i).maxCoeff(&best);
        res.labels[i] = classes[static_cast<std::size_t>(best)];
        res.confidence[i] = conf;
    }
    return res;
}

OversampleResult random_oversample(const Matrix& x, std::span<const int> y, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw DataError("random_oversample: both classes must be present");

    OversampleResult res;
    res.indices.resize(y.size());
    std::iota(res.indices.begin(), res.indices.end(), std::size_t{0});

    const auto& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit =
        std::max(pos.size(), neg.size()) - std::min(pos.size(), neg.size());
    Rng rng(derive_seed(seed, "oversample"));
    for (std::size_t i = 0; i < deficit; ++i)
        res.indices.push_back(minority[rng.index(minority.size())]);

    res.x = x.take_rows(res.indices);
    res.y.resize(res.indices.size());
    for (std::size_t i = 0; i < res.indices.size(); ++i) res.y[i] = y[res.indices[i]];
    return res;
}

} // namespace mait
