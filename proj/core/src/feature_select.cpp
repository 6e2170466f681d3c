#include "mait/feature_select.hpp"

#include <algorithm>
#include <cmath>

#include "mait/error.hpp"
#include "mait/quality.hpp"
#include "mait/stats.hpp"

namespace mait {

FeatureRanking mrmr_rank(const Matrix& x, const std::vector<std::string>& names,
                         std::span<const int> y, int k) {
    if (k < 1) throw ArgumentError("mrmr_rank: k must be >= 1");
    if (names.size() != x.cols) throw ArgumentError("mrmr_rank: name count mismatch");
    const std::size_t d = x.cols;
    const std::size_t target = std::min<std::size_t>(static_cast<std::size_t>(k), d);

    std::vector<std::vector<double>> columns(d);
    std::vector<std::vector<double>> ranks(d);
    std::vector<double> relevance(d);
    for (std::size_t j = 0; j < d; ++j) {
        columns[j] = x.column(j);
        ranks[j] = mid_ranks(columns[j]);
        relevance[j] = mi_estimate_numeric(columns[j], y);
    }

    auto abs_spearman = [&](std::size_t a, std::size_t b) {
        return std::fabs(pearson(ranks[a], ranks[b]));
    };

    FeatureRanking out;
    out.k_requested = k;
    std::vector<bool> taken(d, false);

    for (std::size_t step = 0; step < target; ++step) {
        std::size_t best = d;
        double best_score = -std::numeric_limits<double>::infinity();
        double best_rel = 0.0, best_red = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (taken[j]) continue;
            double red = 0.0;
            for (std::size_t s : out.indices) red += abs_spearman(j, s);
            if (!out.indices.empty()) red /= static_cast<double>(out.indices.size());
            const double score = relevance[j] - red;
            if (score > best_score) { // strict: ties keep the lower index
                best_score = score;
                best = j;
                best_rel = relevance[j];
                best_red = red;
            }
        }
        taken[best] = true;
        out.indices.push_back(best);
        out.names.push_back(names[best]);
        out.relevance.push_back(best_rel);
        out.redundancy.push_back(best_red);
        out.score.push_back(best_score);
    }
    return out;
}

Table apply_ranking(const Table& t, const FeatureRanking& r) {
    std::vector<std::size_t> keep;
    for (const auto& name : r.names) {
        auto i = t.find_column(name);
        if (!i) throw DataError("apply_ranking: column \"" + name + "\" not in table");
        keep.push_back(*i);
    }
    for (std::size_t i = 0; i < t.column_count(); ++i) {
        if (is_outcome_kind(t.column(i).spec.kind)) keep.push_back(i);
    }

    std::vector<ColumnSpec> specs;
    for (auto i : keep) specs.push_back(t.column(i).spec);
    Table out(specs, t.row_count());
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.column(j).num = t.column(keep[j]).num;
        out.column(j).cat = t.column(keep[j]).cat;
        out.column(j).missing = t.column(keep[j]).missing;
    }
    return out;
}

} // namespace mait
