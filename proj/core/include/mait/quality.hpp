#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mait/matrix.hpp"
#include "mait/table.hpp"

namespace mait {

struct QualityProfile {
    std::vector<double> column_missing_fraction; // aligned with table columns
    std::vector<double> row_missing_fraction;
    std::vector<std::string> near_constant_columns;
    std::map<std::string, std::vector<std::string>> rare_categories;
};

QualityProfile quality_profile(const Table& t, double variance_eps, double rare_min_fraction);

struct SpearmanMatrix {
    std::vector<std::string> names;
    Matrix rho; // NaN marks pairs with < 3 complete rows
};

// Spearman over continuous columns plus the binary outcome; pairwise-complete
// rows, mid-ranks for ties.
SpearmanMatrix spearman_matrix(const Table& t);

struct EstimateCI {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

EstimateCI point_biserial(const Table& t, const std::string& x_col, const std::string& y_col,
                          int n_bootstrap, double confidence, std::uint64_t seed);

EstimateCI mutual_information(const Table& t, const std::string& x_col, const std::string& y_col,
                              int bins, int n_bootstrap, double confidence, std::uint64_t seed);

// Quantile-binned plug-in MI estimate on an already numeric feature.
double mi_estimate_numeric(std::span<const double> x, std::span<const int> y, int bins = 10);

struct AssociationEntry {
    std::string feature;
    EstimateCI point_biserial; // only populated for continuous features
    bool has_point_biserial = false;
    EstimateCI mutual_information;
};

struct AssociationReport {
    SpearmanMatrix spearman;
    std::vector<AssociationEntry> outcome_associations;
    int n_bootstrap = 0;
    double confidence = 0.95;
};

AssociationReport associations(const Table& t, const std::string& outcome_col, int n_bootstrap,
                               double confidence, std::uint64_t seed);

// Isolation forest over a fully numeric, fully observed matrix.
class IsolationForest {
public:
    static IsolationForest fit(const Matrix& x, int n_trees, int subsample, std::uint64_t seed);
    std::vector<double> score(const Matrix& x) const;

    struct Node {
        int feature = -1; // -1 => unsplit
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::size_t size = 0; // training points reaching the node
    };

private:
    std::vector<std::vector<Node>> trees_;
    std::size_t subsample_ = 0;
};

std::vector<double> isolation_scores(const Matrix& x, int n_trees, int subsample,
                                     std::uint64_t seed);
std::vector<double> isolation_scores(const Table& t, int n_trees, int subsample,
                                     std::uint64_t seed);

// Average path length normalizer c(n) = 2*H(n-1) - 2*(n-1)/n.
double isolation_c(std::size_t n);

} // namespace mait
