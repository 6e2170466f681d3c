#pragma once

#include <span>
#include <string>
#include <vector>

#include "mait/matrix.hpp"
#include "mait/table.hpp"

namespace mait {

struct FeatureRanking {
    std::vector<std::string> names;      // selection order
    std::vector<std::size_t> indices;    // into the input matrix
    std::vector<double> relevance;       // MI with the outcome at each step
    std::vector<double> redundancy;      // mean |spearman| with already selected
    std::vector<double> score;           // relevance - redundancy
    int k_requested = 0;
};

// Greedy mRMR with the MID (difference) scheme. Relevance is the
// quantile-binned MI estimator, redundancy the mean absolute Spearman
// correlation with the already selected set. Ties break on lower column
// index. Fully deterministic.
FeatureRanking mrmr_rank(const Matrix& x, const std::vector<std::string>& names,
                         std::span<const int> y, int k);

// Restrict a table to the ranked features plus outcome/time/event columns.
Table apply_ranking(const Table& t, const FeatureRanking& r);

} // namespace mait
