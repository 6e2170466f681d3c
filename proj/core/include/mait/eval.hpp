#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mait/matrix.hpp"
#include "mait/model.hpp"

namespace mait {

struct MetricSet {
    double auc = 0.0;
    double pr_auc = 0.0;
    double mcc = 0.0;
    double ppv = 0.0;
    double npv = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double balanced_accuracy = 0.0;
    double brier = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;
    // rank metrics are NaN when y has a single class; denominator metrics
    // are 0 with the flag cleared
    bool auc_defined = true;
    bool pr_auc_defined = true;
    bool ppv_defined = true;
    bool npv_defined = true;
    bool f1_defined = true;
};

// Predicted class is 1 iff p >= threshold. AUC is the Mann-Whitney statistic
// with half credit for ties; PR-AUC is average precision.
MetricSet compute_metrics(std::span<const int> y, std::span<const double> p, double threshold);

double auc_score(std::span<const int> y, std::span<const double> p);
double average_precision(std::span<const int> y, std::span<const double> p);

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> y, int k,
                                                       std::uint64_t seed);

enum class Objective { Auc, PrAuc };

struct SearchResult {
    ModelSpec best;
    double best_score = 0.0;
    std::vector<ModelSpec> candidates;
    std::vector<double> scores;
};

SearchResult random_search(Algorithm algorithm, const Matrix& x, std::span<const int> y,
                           std::span<const double> weights, int n_iter, int inner_k,
                           Objective objective, std::uint64_t seed);

struct ThresholdTrace {
    double initial = 0.5;
    std::vector<double> estimates; // per fold, NaN = skipped (missing class)
    std::vector<double> applied;   // threshold used for that fold's metrics
    double final_threshold = 0.5;
};

struct FoldPredictions {
    std::vector<double> p;
    std::vector<int> y;
};

// Fold f applies the median of estimates from folds 1..f-1 (the initial
// threshold for fold 1); the final threshold is the median of all estimates.
ThresholdTrace tune_threshold(const std::vector<FoldPredictions>& folds, double initial);

double minority_fraction(std::span<const int> y);

struct FoldRecord {
    std::vector<std::size_t> holdout;
    std::vector<double> p;
    std::vector<int> y;
    ModelSpec tuned_spec;
    MetricSet metrics;
    double threshold_estimate = 0.0;
    double applied_threshold = 0.5;
};

struct CandidateResult {
    Algorithm algorithm = Algorithm::LogRegL1;
    std::vector<FoldRecord> folds;
    ThresholdTrace trace;
    double grand_average = 0.0; // mean over folds of (mcc + auc + pr_auc) / 3
};

struct CVResult {
    std::vector<CandidateResult> candidates;
    std::vector<std::vector<std::size_t>> fold_indices;
};

struct CVOptions {
    int k_folds = 5;
    int n_search_iter = 25;
    int inner_folds = 3;
    bool tuning_enabled = true;
    bool threshold_tuning = true;
    double fixed_threshold = 0.5; // used when threshold tuning is off
    Objective objective = Objective::Auc;
    std::uint64_t seed = 0;
    // duplicates minority rows in each fold's training part before the fold
    // model is fit (the search itself runs on the original rows + weights)
    bool oversample = false;
};

// Outer folds are stratified; tuning runs only on each fold's training part
// with class weights recomputed there.
CVResult cross_validate(const std::vector<Algorithm>& candidates, const Matrix& x,
                        std::span<const int> y, const CVOptions& options);

Algorithm select_best(const CVResult& r);

class IsotonicMap {
public:
    // pool-adjacent-violators over (p, y), equal weights, ties pooled first
    static IsotonicMap fit(std::span<const double> p, std::span<const int> y);

    // right-continuous step lookup clipped to [0, 1]
    double apply(double p) const;
    std::vector<double> apply(std::span<const double> p) const;

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
};

inline IsotonicMap isotonic_calibrate(std::span<const double> p, std::span<const int> y) {
    return IsotonicMap::fit(p, y);
}

// Split-conformal quantile: the ceil((n+1)(1-alpha))-th smallest score,
// 1.0 when the index exceeds n.
double conformal_quantile(std::vector<double> scores, double alpha);

std::vector<double> conformal_scores(std::span<const double> p1, std::span<const int> y);

struct LabelSet {
    bool has0 = false;
    bool has1 = false;
    int size() const { return (has0 ? 1 : 0) + (has1 ? 1 : 0); }
};

LabelSet conformal_set(double qhat, double p1);

struct NetBenefitCurve {
    std::vector<double> grid;
    std::vector<double> model;
    std::vector<double> treat_all;
    std::vector<double> treat_none; // identically zero
    std::vector<double> random_classifier;
    double harm_weight = 1.0;
};

NetBenefitCurve net_benefit_curve(std::span<const int> y, std::span<const double> p,
                                  std::span<const double> grid, double harm_weight);

struct FilterResult {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> discarded;
    std::vector<std::string> reasons; // aligned with discarded
};

// A row is discarded when its probability sits within prob_band of 0.5
// AND (or OR, by flag) its attribution L1 norm falls at or below the
// shap_quantile quantile of all rows' norms.
FilterResult uncertainty_filter(std::span<const double> p, std::span<const double> shap_l1,
                                double prob_band, double shap_quantile, bool combine_and = true);

} // namespace mait
