#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mait/eval.hpp"
#include "mait/matrix.hpp"
#include "mait/model.hpp"

namespace mait {

struct ShapMatrix {
    enum class Scale { Margin, Probability };

    Matrix values; // rows x features
    Matrix se;     // standard errors, Monte-Carlo engine only
    double base_value = 0.0;
    std::vector<std::string> feature_names;
    Scale scale = Scale::Margin;

    std::vector<double> row_l1() const;
};

// Exact path-dependent TreeSHAP summed over the ensemble; covers drive the
// conditional expectations and the base value.
ShapMatrix tree_shap(const TrainedModel& model, const Matrix& x);

// phi_j = w_j (x_j - mu_j) under the independence assumption.
ShapMatrix linear_shap(const TrainedModel& model, const Matrix& x,
                       std::span<const double> background_means);

// Permutation-sampling Shapley with background replacement on the margin
// scale. Background rows are cycled round-robin across orderings.
ShapMatrix mc_shapley(const TrainedModel& model, const Matrix& x, const Matrix& background,
                      int n_orderings, std::uint64_t seed);

// Engine dispatch: trees -> tree_shap, linear -> linear_shap, otherwise
// mc_shapley.
ShapMatrix attributions_for(const TrainedModel& model, const Matrix& x, const Matrix& background,
                            int n_orderings, std::uint64_t seed);

enum class ImportanceMetric { Auc, Mcc };

struct PermutationImportance {
    double baseline = 0.0;
    std::vector<double> mean_drop;
    std::vector<double> sd;
};

PermutationImportance permutation_importance(const TrainedModel& model, const Matrix& x,
                                             std::span<const int> y, ImportanceMetric metric,
                                             int n_repeats, std::uint64_t seed,
                                             double threshold = 0.5);

struct PairInteraction {
    std::size_t i = 0;
    std::size_t j = 0;
    double score = 0.0;
};

// I(i,j) = drop(i) + drop(j) - drop(i,j jointly, shared permutation);
// positive values flag pairs whose signal lives in the combination.
std::vector<PairInteraction> pair_interactions(const TrainedModel& model, const Matrix& x,
                                               std::span<const int> y, ImportanceMetric metric,
                                               int n_repeats, std::uint64_t seed,
                                               double threshold = 0.5);

struct SignificanceResult {
    double tau = 0.0; // global mean |attribution|
    std::vector<double> crossing_fraction;
    std::vector<double> median_abs;
    std::vector<std::uint8_t> significant;
};

// Bootstrap row-resamples of the attribution matrix; a feature is
// significant when its IQR of |attribution| crosses tau in < 5% of
// resamples and its full-data median |attribution| exceeds tau.
SignificanceResult shap_significance(const ShapMatrix& shap, int n_bootstrap,
                                     std::uint64_t seed);

struct ClusterResult {
    std::vector<int> labels;
    int chosen_k = 1;
    bool degenerate = false; // all attribution rows identical
    std::vector<int> tried_k;
    std::vector<double> silhouettes;
    Matrix per_cluster_importance; // k x features, mean |attribution|
    std::vector<MetricSet> per_cluster_metrics;
};

ClusterResult shap_clusters(const ShapMatrix& shap, std::span<const int> y,
                            std::span<const double> p, double threshold, int k_min, int k_max,
                            std::uint64_t seed);

struct CorrectOnlyImportance {
    bool defined = false; // false when no row is correctly classified
    std::size_t correct_rows = 0;
    std::vector<double> mean_abs;
};

CorrectOnlyImportance correct_only_importance(const ShapMatrix& shap, std::span<const int> y,
                                              std::span<const double> p, double threshold);

struct ImportanceTable {
    std::vector<std::string> features;
    std::vector<std::string> methods;
    Matrix raw;        // methods x features
    Matrix normalized; // methods x features, min-max in [0,1]
    std::vector<std::uint8_t> constant_method; // flagged: mapped to all-0
    std::vector<double> unified; // mean of normalized scores
    std::vector<std::size_t> rank; // 1-based, by unified descending, ties by name
};

ImportanceTable unify_importance(
    const std::vector<std::pair<std::string, std::vector<double>>>& method_scores,
    const std::vector<std::string>& features);

// k-means backing shap_clusters (k-means++ seeding, seeded restarts).
struct KMeansResult {
    std::vector<int> labels;
    Matrix centroids;
    double inertia = 0.0;
};

KMeansResult kmeans(const Matrix& x, int k, int restarts, int max_iter, double tol,
                    std::uint64_t seed);

double mean_silhouette(const Matrix& x, std::span<const int> labels, int k);

} // namespace mait
