#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mait/matrix.hpp"

namespace mait {

enum class Algorithm { LogRegL1, Gnb, RandomForest, Hgbt, LinearReg, RfReg };

const char* to_string(Algorithm a);
std::optional<Algorithm> algorithm_from_string(std::string_view s);
bool algorithm_is_classifier(Algorithm a);

struct ModelSpec {
    Algorithm algorithm = Algorithm::LogRegL1;
    std::map<std::string, double> hyperparameters;
    std::uint64_t seed = 0;

    double hyper(const std::string& key, double fallback) const {
        auto it = hyperparameters.find(key);
        return it == hyperparameters.end() ? fallback : it->second;
    }
};

// Shared decision-tree node. Split rule: x[feature] <= threshold goes left,
// NaN follows default_left. feature < 0 marks a leaf.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    bool default_left = true;
    double value = 0.0; // leaf payload
    double cover = 0.0; // weighted training rows through the node
    double gain = 0.0;  // split criterion improvement

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes; // root at index 0

    double predict(std::span<const double> row) const;
    int leaf_of(std::span<const double> row) const;

    bool operator==(const Tree&) const = default;
};

struct ClassWeights {
    double negative = 1.0;
    double positive = 1.0;

    double at(int label) const { return label == 1 ? positive : negative; }
};

// w_c = n / (2 * n_c)
ClassWeights class_weights(std::span<const int> y);

struct TrainedModel {
    ModelSpec spec;
    std::vector<std::string> feature_names;

    // linear family
    std::vector<double> coefficients;
    double intercept = 0.0;

    // gaussian naive bayes (2 x D)
    std::vector<double> class_log_prior;
    Matrix class_mean;
    Matrix class_var;

    // tree family; ensemble margin = base_score + tree_scale * sum(leaf)
    std::vector<Tree> trees;
    double base_score = 0.0;
    double tree_scale = 1.0;
    std::vector<double> training_loss; // per boosting iteration (hgbt)

    bool is_classifier() const { return algorithm_is_classifier(spec.algorithm); }
    bool is_tree_model() const {
        return spec.algorithm == Algorithm::RandomForest || spec.algorithm == Algorithm::Hgbt ||
               spec.algorithm == Algorithm::RfReg;
    }
};

TrainedModel fit_classifier(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                            std::span<const double> sample_weights);
TrainedModel fit_regressor(const ModelSpec& spec, const Matrix& x, std::span<const double> y);

std::vector<double> predict_proba(const TrainedModel& m, const Matrix& x);
std::vector<double> predict_value(const TrainedModel& m, const Matrix& x);

// Additive model output: log-odds for logreg/gnb/hgbt, class-1 fraction for
// random_forest, prediction for regressors. Attribution engines work here.
std::vector<double> predict_margin(const TrainedModel& m, const Matrix& x);

// Per-feature accumulated split gain across all trees (empty for
// non-tree models).
std::vector<double> tree_gain_importance(const TrainedModel& m);

std::string serialize_model(const TrainedModel& m);
TrainedModel deserialize_model(const std::string& text);
void save_model(const TrainedModel& m, const std::string& path);
TrainedModel load_model(const std::string& path);

// Adaptive random-search space (ranges depend on dataset shape).
struct HyperRange {
    std::string key;
    double lo = 0.0;
    double hi = 0.0;
    bool log_scale = false;
    bool integer = false;
};

std::vector<HyperRange> hyperparameter_space(Algorithm a, std::size_t n_rows,
                                             std::size_t n_cols);
ModelSpec sample_spec(Algorithm a, std::size_t n_rows, std::size_t n_cols, std::uint64_t seed);
ModelSpec default_spec(Algorithm a, std::uint64_t seed = 0);

namespace detail {
TrainedModel fit_logreg_l1(const ModelSpec&, const Matrix&, std::span<const int>,
                           std::span<const double>);
TrainedModel fit_gnb(const ModelSpec&, const Matrix&, std::span<const int>,
                     std::span<const double>);
TrainedModel fit_random_forest(const ModelSpec&, const Matrix&, std::span<const int>,
                               std::span<const double>);
TrainedModel fit_hgbt(const ModelSpec&, const Matrix&, std::span<const int>,
                      std::span<const double>);
TrainedModel fit_linear_reg(const ModelSpec&, const Matrix&, std::span<const double>);
TrainedModel fit_rf_reg(const ModelSpec&, const Matrix&, std::span<const double>);

double sigmoid(double m);
double log1pexp(double m);
} // namespace detail

} // namespace mait
