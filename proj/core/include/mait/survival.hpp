#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mait/matrix.hpp"
#include "mait/model.hpp"

namespace mait {

struct SurvivalData {
    std::vector<double> time;
    std::vector<int> event; // 1 = event observed, 0 = censored
    Matrix features;
    std::vector<std::string> feature_names;
};

// Right-continuous step curve: value at t is chf[i] for the largest
// time_grid[i] <= t, and 0 before the first grid point. Doubles as a
// survival-probability curve where noted (then the pre-grid value is 1).
struct HazardCurve {
    std::vector<double> time_grid;
    std::vector<double> chf;

    double at(double t) const;
    double at(double t, double before_first) const;
};

using SurvivalCurve = HazardCurve;

HazardCurve nelson_aalen(std::span<const double> time, std::span<const int> event);

// Kaplan-Meier survival estimate; flip the indicator for the censoring
// distribution. at(t, 1.0) gives S(t); left limits via before().
struct KaplanMeier {
    std::vector<double> times;
    std::vector<double> surv;

    double at(double t) const;     // S(t), right-continuous
    double before(double t) const; // S(t-)
};

KaplanMeier kaplan_meier(std::span<const double> time, std::span<const int> event);

// Distinct event times, optionally truncated to a horizon.
std::vector<double> event_time_grid(std::span<const double> time, std::span<const int> event,
                                    double horizon = std::numeric_limits<double>::infinity());

struct CoxModel {
    std::vector<double> beta; // on internally standardized features
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;
    HazardCurve baseline_chf; // Breslow, for the standardized predictor
    std::vector<std::string> feature_names;
    double lambda = 0.0;
    double l1_ratio = 0.5;
    int iterations = 0;

    double risk_score(std::span<const double> row) const;
    std::vector<double> risk_scores(const Matrix& x) const;
};

// Penalized Breslow partial likelihood, cyclic coordinate descent on the
// IRLS quadratic approximation. Penalty: lambda * (l1 ‖b‖1 + (1-l1)/2 ‖b‖2²)
// with the log likelihood scaled by 1/n.
CoxModel fit_cox_en(const SurvivalData& d, double lambda, double l1_ratio, int max_iter = 100,
                    double tol = 1e-7);

struct RsfModel {
    std::vector<Tree> trees; // leaf value = index into leaf_curves[tree]
    std::vector<std::vector<HazardCurve>> leaf_curves;
    std::vector<std::string> feature_names;
    std::vector<double> event_grid; // distinct training event times
};

// Log-rank splitting over sqrt(D) candidate features and at most 10
// quantile thresholds per feature; leaves hold leaf-local Nelson-Aalen
// curves.
RsfModel fit_rsf(const SurvivalData& d, int n_trees, int min_leaf, std::uint64_t seed,
                 bool bootstrap = true);

std::vector<HazardCurve> predict_chf(const RsfModel& m, const Matrix& x,
                                     std::span<const double> grid);
std::vector<HazardCurve> predict_chf(const CoxModel& m, const Matrix& x,
                                     std::span<const double> grid);

// Ensemble CHF of one row evaluated on a grid.
std::vector<double> rsf_chf_row(const RsfModel& m, std::span<const double> row,
                                std::span<const double> grid);

// Harrell's C: comparable pairs require t_i < t_j with event at i; tied
// risks score half. NaN when no pair is comparable.
double concordance_index(std::span<const double> risk, std::span<const double> time,
                         std::span<const int> event);

// Graf IPCW Brier score averaged over the grid by trapezoid; survival
// curves S(t|x), censoring from Kaplan-Meier on flipped indicators.
double integrated_brier(const std::vector<SurvivalCurve>& surv, std::span<const double> time,
                        std::span<const int> event, std::span<const double> grid,
                        bool* truncated = nullptr);

std::vector<SurvivalCurve> chf_to_survival(const std::vector<HazardCurve>& chf);

// IPCW cumulative/dynamic AUC at one evaluation time. NaN when cases or
// controls are absent.
double cumulative_dynamic_auc(std::span<const double> risk, std::span<const double> time,
                              std::span<const int> event, double t_eval);

struct ClassMedianCurves {
    std::vector<double> grid;
    std::vector<double> event_median;
    std::vector<double> event_free_median;
    std::size_t event_count = 0;
    std::size_t event_free_count = 0;
};

struct TranslationResult {
    std::vector<int> predicted;
    std::vector<double> distance_event;
    std::vector<double> distance_event_free;
    ClassMedianCurves medians;
};

// Median training CHF per class (event: delta=1; event-free: delta=0 with
// follow-up reaching the horizon) on the union of event times within the
// horizon; test rows take the nearer median, ties to the event class.
TranslationResult chf_to_binary(const std::vector<HazardCurve>& train_curves,
                                std::span<const double> train_time,
                                std::span<const int> train_event,
                                const std::vector<HazardCurve>& test_curves, double horizon);

struct SurvivalAttribution {
    std::vector<double> grid;
    std::vector<Matrix> per_row;            // features x grid, one per x row
    Matrix per_row_scalar;                  // rows x features, trapezoid of |attr|
    std::vector<double> scalar_importance;  // mean over rows
    std::vector<double> permutation_importance; // CI drop per feature
    std::vector<double> permutation_sd;
    double baseline_ci = 0.0;
};

// Monte-Carlo functional Shapley on the ensemble CHF (background-replaced
// coalitions) plus permutation importance of the concordance index.
SurvivalAttribution survival_attributions(const RsfModel& model, const Matrix& x,
                                          std::span<const double> time,
                                          std::span<const int> event, const Matrix& background,
                                          std::span<const double> grid, int n_permutations,
                                          int n_perm_repeats, std::uint64_t seed);

} // namespace mait
