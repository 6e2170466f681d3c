#include "mait/quality.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mait/error.hpp"
#include "mait/parallel.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

namespace mait {

QualityProfile quality_profile(const Table& t, double variance_eps, double rare_min_fraction) {
    QualityProfile p;
    const std::size_t n = t.row_count();
    p.column_missing_fraction.resize(t.column_count(), 0.0);
    p.row_missing_fraction.assign(n, 0.0);

    for (std::size_t c = 0; c < t.column_count(); ++c) {
        const Column& col = t.column(c);
        std::size_t miss = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (col.missing[r]) {
                ++miss;
                p.row_missing_fraction[r] += 1.0;
            }
        }
        p.column_missing_fraction[c] = n ? static_cast<double>(miss) / n : 0.0;

        if (col.spec.kind == ColumnKind::Continuous) {
            std::vector<double> obs;
            for (std::size_t r = 0; r < n; ++r)
                if (!col.missing[r]) obs.push_back(col.num[r]);
            if (!obs.empty() && sample_variance(obs) <= variance_eps)
                p.near_constant_columns.push_back(col.spec.name);
        } else if (col.spec.kind == ColumnKind::Categorical) {
            std::map<std::string, std::size_t> counts;
            std::size_t observed = 0;
            for (std::size_t r = 0; r < n; ++r) {
                if (col.missing[r]) continue;
                ++counts[col.cat[r]];
                ++observed;
            }
            std::vector<std::string> rare;
            for (const auto& [cat, cnt] : counts) {
                if (observed && static_cast<double>(cnt) / observed < rare_min_fraction)
                    rare.push_back(cat);
            }
            if (!rare.empty()) p.rare_categories[col.spec.name] = std::move(rare);
        }
    }
    if (t.column_count() > 0)
        for (auto& f : p.row_missing_fraction) f /= static_cast<double>(t.column_count());
    return p;
}

namespace {

std::vector<std::size_t> spearman_column_set(const Table& t) {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < t.column_count(); ++i) {
        const auto k = t.column(i).spec.kind;
        if (k == ColumnKind::Continuous || k == ColumnKind::BinaryOutcome ||
            k == ColumnKind::ContinuousOutcome)
            cols.push_back(i);
    }
    return cols;
}

} // namespace

SpearmanMatrix spearman_matrix(const Table& t) {
    const auto cols = spearman_column_set(t);
    if (cols.size() < 2)
        throw ArgumentError("spearman_matrix: need at least 2 continuous-or-outcome columns");

    SpearmanMatrix out;
    for (auto c : cols) out.names.push_back(t.column(c).spec.name);
    out.rho = Matrix(cols.size(), cols.size(), kMissing);

    for (std::size_t a = 0; a < cols.size(); ++a) {
        out.rho.at(a, a) = 1.0;
        for (std::size_t b = a + 1; b < cols.size(); ++b) {
            const Column& ca = t.column(cols[a]);
            const Column& cb = t.column(cols[b]);
            std::vector<double> xa, xb;
            for (std::size_t r = 0; r < t.row_count(); ++r) {
                if (ca.missing[r] || cb.missing[r]) continue;
                xa.push_back(ca.num[r]);
                xb.push_back(cb.num[r]);
            }
            if (xa.size() < 3) continue; // leave MISSING
            const auto ra = mid_ranks(xa);
            const auto rb = mid_ranks(xb);
            const double rho = pearson(ra, rb);
            out.rho.at(a, b) = rho;
            out.rho.at(b, a) = rho;
        }
    }
    return out;
}

namespace {

struct CompletePairs {
    std::vector<double> x;
    std::vector<int> y;
};

CompletePairs complete_numeric_pairs(const Column& xc, const Column& yc) {
    CompletePairs cp;
    for (std::size_t r = 0; r < xc.num.size(); ++r) {
        if (xc.missing[r] || yc.missing[r]) continue;
        cp.x.push_back(xc.num[r]);
        cp.y.push_back(static_cast<int>(yc.num[r]));
    }
    return cp;
}

void require_both_classes(std::span<const int> y, const char* who) {
    bool has0 = false, has1 = false;
    for (int v : y) (v == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw DataError(std::string(who) + ": outcome has a single class");
}

EstimateCI percentile_ci(double estimate, std::vector<double> boot, double confidence) {
    std::sort(boot.begin(), boot.end());
    EstimateCI ci;
    ci.estimate = estimate;
    const double a = (1.0 - confidence) / 2.0;
    ci.lo = quantile_sorted(boot, a);
    ci.hi = quantile_sorted(boot, 1.0 - a);
    return ci;
}

} // namespace

EstimateCI point_biserial(const Table& t, const std::string& x_col, const std::string& y_col,
                          int n_bootstrap, double confidence, std::uint64_t seed) {
    const auto cp = complete_numeric_pairs(t.column(x_col), t.column(y_col));
    require_both_classes(cp.y, "point_biserial");

    std::vector<double> y01(cp.y.begin(), cp.y.end());
    const double est = pearson(cp.x, y01);

    const std::size_t n = cp.x.size();
    std::vector<double> boot(n_bootstrap);
    for (int b = 0; b < n_bootstrap; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<double> bx(n), by(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = rng.index(n);
            bx[i] = cp.x[j];
            by[i] = y01[j];
        }
        boot[b] = pearson(bx, by);
    }
    return percentile_ci(est, std::move(boot), confidence);
}

double mi_estimate_numeric(std::span<const double> x, std::span<const int> y, int bins) {
    const auto codes = quantile_bin_codes(x, bins);
    return plug_in_mi(codes, y);
}

EstimateCI mutual_information(const Table& t, const std::string& x_col, const std::string& y_col,
                              int bins, int n_bootstrap, double confidence, std::uint64_t seed) {
    const Column& xc = t.column(x_col);
    const Column& yc = t.column(y_col);

    // assemble complete pairs; categorical x becomes vocabulary codes
    std::vector<int> xcodes;
    std::vector<double> xnum;
    std::vector<int> y;
    if (xc.is_token()) {
        std::set<std::string> vocab;
        for (std::size_t r = 0; r < t.row_count(); ++r)
            if (!xc.missing[r] && !yc.missing[r]) vocab.insert(xc.cat[r]);
        std::map<std::string, int> code;
        int next = 0;
        for (const auto& v : vocab) code[v] = next++;
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            if (xc.missing[r] || yc.missing[r]) continue;
            xcodes.push_back(code[xc.cat[r]]);
            y.push_back(static_cast<int>(yc.num[r]));
        }
    } else {
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            if (xc.missing[r] || yc.missing[r]) continue;
            xnum.push_back(xc.num[r]);
            y.push_back(static_cast<int>(yc.num[r]));
        }
    }
    require_both_classes(y, "mutual_information");

    const bool numeric = !xc.is_token();
    auto estimate_on = [&](std::span<const int> xs, std::span<const double> xn,
                           std::span<const int> ys) {
        if (numeric) return mi_estimate_numeric(xn, ys, bins);
        return plug_in_mi(xs, ys);
    };

    const double est = estimate_on(xcodes, xnum, y);
    const std::size_t n = y.size();
    std::vector<double> boot(n_bootstrap);
    for (int b = 0; b < n_bootstrap; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<int> bxc(numeric ? 0 : n), bys(n);
        std::vector<double> bxn(numeric ? n : 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = rng.index(n);
            if (numeric) bxn[i] = xnum[j];
            else bxc[i] = xcodes[j];
            bys[i] = y[j];
        }
        boot[b] = estimate_on(bxc, bxn, bys);
    }
    return percentile_ci(est, std::move(boot), confidence);
}

AssociationReport associations(const Table& t, const std::string& outcome_col, int n_bootstrap,
                               double confidence, std::uint64_t seed) {
    AssociationReport rep;
    rep.n_bootstrap = n_bootstrap;
    rep.confidence = confidence;
    rep.spearman = spearman_matrix(t);

    std::vector<const Column*> features;
    for (const auto& c : t.columns()) {
        if (c.spec.kind == ColumnKind::Continuous || c.spec.kind == ColumnKind::Categorical)
            features.push_back(&c);
    }
    rep.outcome_associations.resize(features.size());
    parallel_for(features.size(), [&](std::size_t i) {
        const Column& c = *features[i];
        AssociationEntry e;
        e.feature = c.spec.name;
        if (c.spec.kind == ColumnKind::Continuous) {
            e.point_biserial = point_biserial(t, c.spec.name, outcome_col, n_bootstrap, confidence,
                                              derive_seed(seed, "pb:" + c.spec.name));
            e.has_point_biserial = true;
        }
        e.mutual_information = mutual_information(t, c.spec.name, outcome_col, 10, n_bootstrap,
                                                  confidence, derive_seed(seed, "mi:" + c.spec.name));
        rep.outcome_associations[i] = std::move(e);
    });
    return rep;
}

double isolation_c(std::size_t n) {
    if (n < 2) return 0.0;
    double h = 0.0;
    for (std::size_t i = 1; i < n; ++i) h += 1.0 / static_cast<double>(i);
    return 2.0 * h - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

IsolationForest IsolationForest::fit(const Matrix& x, int n_trees, int subsample,
                                     std::uint64_t seed) {
    if (n_trees < 1) throw ArgumentError("isolation forest: n_trees must be >= 1");
    IsolationForest f;
    const std::size_t n = x.rows;
    const std::size_t sub = std::min<std::size_t>(std::max(subsample, 2), n);
    f.subsample_ = sub;
    f.trees_.resize(n_trees);
    const int height_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(sub))));

    parallel_for(static_cast<std::size_t>(n_trees), [&](std::size_t ti) {
        Rng rng(derive_seed(seed, ti));
        // uniform subsample without replacement
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < sub; ++i)
            std::swap(pool[i], pool[i + rng.index(n - i)]);
        pool.resize(sub);

        auto& nodes = f.trees_[ti];
        nodes.clear();
        // iterative build; stack entries own their row subsets
        struct Item {
            std::vector<std::size_t> rows;
            int depth;
            int slot;
        };
        std::vector<Item> stack;
        nodes.push_back({});
        stack.push_back({std::move(pool), 0, 0});
        while (!stack.empty()) {
            Item it = std::move(stack.back());
            stack.pop_back();
            Node& nd = nodes[it.slot];
            nd.size = it.rows.size();
            if (it.rows.size() <= 1 || it.depth >= height_limit) continue;

            // candidate features with spread
            std::vector<std::size_t> candidates;
            for (std::size_t c = 0; c < x.cols; ++c) {
                double lo = x.at(it.rows[0], c), hi = lo;
                for (std::size_t r : it.rows) {
                    lo = std::min(lo, x.at(r, c));
                    hi = std::max(hi, x.at(r, c));
                }
                if (hi > lo) candidates.push_back(c);
            }
            if (candidates.empty()) continue;
            const std::size_t feat = candidates[rng.index(candidates.size())];
            double lo = x.at(it.rows[0], feat), hi = lo;
            for (std::size_t r : it.rows) {
                lo = std::min(lo, x.at(r, feat));
                hi = std::max(hi, x.at(r, feat));
            }
            double split = lo + rng.uniform01() * (hi - lo);
            if (!(split > lo && split < hi)) split = lo + 0.5 * (hi - lo);
            if (!(split > lo && split < hi)) continue; // adjacent floats, give up

            std::vector<std::size_t> left, right;
            for (std::size_t r : it.rows)
                (x.at(r, feat) < split ? left : right).push_back(r);

            const int li = static_cast<int>(nodes.size());
            nodes.push_back({});
            const int ri = static_cast<int>(nodes.size());
            nodes.push_back({});
            Node& nd2 = nodes[it.slot]; // reacquire, vector may have grown
            nd2.feature = static_cast<int>(feat);
            nd2.threshold = split;
            nd2.left = li;
            nd2.right = ri;
            stack.push_back({std::move(right), it.depth + 1, ri});
            stack.push_back({std::move(left), it.depth + 1, li});
        }
    });
    return f;
}

std::vector<double> IsolationForest::score(const Matrix& x) const {
    std::vector<double> scores(x.rows, 0.0);
    const double cn = isolation_c(subsample_);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double total = 0.0;
        for (const auto& tree : trees_) {
            int cur = 0;
            int depth = 0;
            while (tree[cur].feature >= 0) {
                cur = x.at(r, tree[cur].feature) < tree[cur].threshold ? tree[cur].left
                                                                       : tree[cur].right;
                ++depth;
            }
            total += depth + isolation_c(tree[cur].size);
        }
        const double eh = total / static_cast<double>(trees_.size());
        scores[r] = std::pow(2.0, -eh / cn);
    }
    return scores;
}

std::vector<double> isolation_scores(const Matrix& x, int n_trees, int subsample,
                                     std::uint64_t seed) {
    return IsolationForest::fit(x, n_trees, subsample, seed).score(x);
}

std::vector<double> isolation_scores(const Table& t, int n_trees, int subsample,
                                     std::uint64_t seed) {
    auto [m, names] = t.continuous_features();
    if (m.has_missing())
        throw DataError("isolation_scores: missing cells must be imputed upstream");
    return isolation_scores(m, n_trees, subsample, seed);
}

} // namespace mait
