#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mait {

// Minimal TOML reader covering what the pipeline config uses: [section]
// headers (dotted allowed), key = value with strings, numbers, booleans and
// flat arrays, # comments. Keys flatten to "section.key".
struct TomlValue {
    enum class Kind { String, Number, Boolean, Array };
    Kind kind = Kind::String;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;
};

std::map<std::string, TomlValue> parse_toml(const std::string& text);
std::map<std::string, TomlValue> parse_toml_file(const std::string& path);

struct PipelineConfig {
    // [data]
    std::string development_path;
    std::string external_test_path;

    // [columns]
    std::string outcome;            // binary classification target
    std::string continuous_outcome; // regression target
    std::string time_column;
    std::string event_column;
    std::vector<std::string> categorical;
    std::vector<std::string> identifier;

    // [modes]
    bool classify = true;
    bool survival = false;
    bool regression = false;

    // [split]
    double test_fraction = 0.3;
    std::vector<std::string> stratify_columns; // empty: derived from the mode
    int stratify_quantile_bins = 4;

    // [cv]
    int k_folds = 5;
    int n_search_iter = 25;
    int inner_folds = 3;
    bool tuning = true;
    std::string objective = "auc"; // or "pr_auc"

    // [models]
    std::vector<std::string> candidates = {"logreg_l1", "gnb", "random_forest", "hgbt"};

    // [options]
    bool feature_selection = false;
    int feature_k = 10;
    bool scaling = true;
    bool calibration = false;
    bool conformal = false;
    double conformal_alpha = 0.1;
    bool threshold_tuning = true;
    bool oversampling = false;
    bool label_propagation = false;
    bool uncertainty_filter = false;
    bool clustering = false;
    int cluster_k_min = 2;
    int cluster_k_max = 8;
    bool interactions = false;

    // [quality]
    double variance_eps = 1e-12;
    double rare_min_fraction = 0.05;
    int quality_bootstrap = 500;
    double confidence = 0.95;
    int isolation_trees = 200;
    int isolation_subsample = 256;

    // [preprocess]
    int knn_k = 5;
    double label_prop_sigma = 0.0; // 0 = median heuristic

    // [uncertainty]
    double uncertainty_prob_band = 0.1;
    double uncertainty_shap_quantile = 0.1;
    bool uncertainty_combine_and = true;

    // [dca]
    double dca_harm_weight = 1.0;
    double dca_grid_min = 0.01;
    double dca_grid_max = 0.99;
    int dca_grid_points = 99;

    // [explain]
    int background_rows = 100;
    int mc_orderings = 50;
    int significance_bootstrap = 200;
    int permutation_repeats = 10;

    // [survival]
    double horizon = 0.0;
    int rsf_trees = 100;
    int rsf_min_leaf = 10;
    double cox_lambda = 0.01;
    double cox_l1_ratio = 0.5;
    int survshap_permutations = 30;

    // [run]
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";

    std::string config_hash; // FNV-1a of the raw config text
};

// Strict parse: unknown keys are an error listing every offender; missing
// required keys name themselves; defaults are filled on the returned value.
PipelineConfig parse_config(const std::string& path);
PipelineConfig parse_config_text(const std::string& text);

std::string fnv1a_hex(const std::string& bytes);

} // namespace mait
