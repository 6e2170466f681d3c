#include "mait/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mait/error.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

namespace mait {

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::LogRegL1: return "logreg_l1";
        case Algorithm::Gnb: return "gnb";
        case Algorithm::RandomForest: return "random_forest";
        case Algorithm::Hgbt: return "hgbt";
        case Algorithm::LinearReg: return "linear_reg";
        case Algorithm::RfReg: return "rf_reg";
    }
    return "?";
}

std::optional<Algorithm> algorithm_from_string(std::string_view s) {
    if (s == "logreg_l1") return Algorithm::LogRegL1;
    if (s == "gnb") return Algorithm::Gnb;
    if (s == "random_forest") return Algorithm::RandomForest;
    if (s == "hgbt") return Algorithm::Hgbt;
    if (s == "linear_reg") return Algorithm::LinearReg;
    if (s == "rf_reg") return Algorithm::RfReg;
    return std::nullopt;
}

bool algorithm_is_classifier(Algorithm a) {
    return a == Algorithm::LogRegL1 || a == Algorithm::Gnb || a == Algorithm::RandomForest ||
           a == Algorithm::Hgbt;
}

double Tree::predict(std::span<const double> row) const {
    int cur = 0;
    while (!nodes[cur].is_leaf()) {
        const TreeNode& nd = nodes[cur];
        const double v = row[nd.feature];
        if (std::isnan(v)) cur = nd.default_left ? nd.left : nd.right;
        else cur = v <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[cur].value;
}

int Tree::leaf_of(std::span<const double> row) const {
    int cur = 0;
    while (!nodes[cur].is_leaf()) {
        const TreeNode& nd = nodes[cur];
        const double v = row[nd.feature];
        if (std::isnan(v)) cur = nd.default_left ? nd.left : nd.right;
        else cur = v <= nd.threshold ? nd.left : nd.right;
    }
    return cur;
}

ClassWeights class_weights(std::span<const int> y) {
    std::size_t n1 = 0;
    for (int v : y) n1 += v == 1;
    const std::size_t n0 = y.size() - n1;
    if (n0 == 0 || n1 == 0) throw TrainingError("class_weights: single class");
    const double n = static_cast<double>(y.size());
    return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
}

namespace detail {

double sigmoid(double m) {
    if (m >= 0) {
        const double e = std::exp(-m);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(m);
    return e / (1.0 + e);
}

double log1pexp(double m) {
    if (m > 0) return m + std::log1p(std::exp(-m));
    return std::log1p(std::exp(m));
}

} // namespace detail

namespace {

void check_features(const TrainedModel& m, const Matrix& x) {
    if (x.cols != m.feature_names.size())
        throw PredictionError("feature count mismatch: model has " +
                              std::to_string(m.feature_names.size()) + ", input has " +
                              std::to_string(x.cols));
}

void check_training_input(const Matrix& x, std::span<const double> w, bool allow_missing) {
    if (!allow_missing) {
        for (double v : x.data)
            if (!std::isfinite(v)) throw TrainingError("non-finite value in training matrix");
    } else {
        for (double v : x.data)
            if (std::isinf(v)) throw TrainingError("infinite value in training matrix");
    }
    if (w.size() != x.rows) throw TrainingError("sample weight length mismatch");
    for (double v : w)
        if (!(v > 0.0) || !std::isfinite(v))
            throw TrainingError("sample weights must be positive finite");
}

std::vector<double> tree_margins(const TrainedModel& m, const Matrix& x) {
    std::vector<double> out(x.rows, m.base_score);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double s = 0.0;
        for (const auto& t : m.trees) s += t.predict(x.row(r));
        out[r] += m.tree_scale * s;
    }
    return out;
}

} // namespace

TrainedModel fit_classifier(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                            std::span<const double> sample_weights) {
    if (!algorithm_is_classifier(spec.algorithm))
        throw TrainingError("fit_classifier: not a classification algorithm");
    if (y.size() != x.rows) throw TrainingError("label length mismatch");
    check_training_input(x, sample_weights, spec.algorithm == Algorithm::Hgbt);
    bool has0 = false, has1 = false;
    for (int v : y) (v == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw TrainingError("training labels contain a single class");

    TrainedModel model;
    switch (spec.algorithm) {
        case Algorithm::LogRegL1: model = detail::fit_logreg_l1(spec, x, y, sample_weights); break;
        case Algorithm::Gnb: model = detail::fit_gnb(spec, x, y, sample_weights); break;
        case Algorithm::RandomForest:
            model = detail::fit_random_forest(spec, x, y, sample_weights);
            break;
        case Algorithm::Hgbt: model = detail::fit_hgbt(spec, x, y, sample_weights); break;
        default: throw TrainingError("unreachable");
    }
    if (model.feature_names.size() != x.cols) {
        model.feature_names.resize(x.cols);
        for (std::size_t c = 0; c < x.cols; ++c) model.feature_names[c] = "f" + std::to_string(c);
    }
    return model;
}

TrainedModel fit_regressor(const ModelSpec& spec, const Matrix& x, std::span<const double> y) {
    if (algorithm_is_classifier(spec.algorithm))
        throw TrainingError("fit_regressor: not a regression algorithm");
    if (x.rows < 2) throw TrainingError("fit_regressor: need at least 2 rows");
    if (y.size() != x.rows) throw TrainingError("target length mismatch");
    for (double v : y)
        if (!std::isfinite(v)) throw TrainingError("non-finite regression target");
    std::vector<double> unit(x.rows, 1.0);
    check_training_input(x, unit, false);

    TrainedModel model = spec.algorithm == Algorithm::LinearReg
                             ? detail::fit_linear_reg(spec, x, y)
                             : detail::fit_rf_reg(spec, x, y);
    if (model.feature_names.size() != x.cols) {
        model.feature_names.resize(x.cols);
        for (std::size_t c = 0; c < x.cols; ++c) model.feature_names[c] = "f" + std::to_string(c);
    }
    return model;
}

std::vector<double> predict_margin(const TrainedModel& m, const Matrix& x) {
    check_features(m, x);
    switch (m.spec.algorithm) {
        case Algorithm::LogRegL1:
        case Algorithm::LinearReg: {
            std::vector<double> out(x.rows, m.intercept);
            for (std::size_t r = 0; r < x.rows; ++r) {
                const auto row = x.row(r);
                double s = 0.0;
                for (std::size_t c = 0; c < x.cols; ++c) s += m.coefficients[c] * row[c];
                out[r] += s;
            }
            return out;
        }
        case Algorithm::Gnb: {
            std::vector<double> out(x.rows);
            for (std::size_t r = 0; r < x.rows; ++r) {
                const auto row = x.row(r);
                double lp0 = m.class_log_prior[0], lp1 = m.class_log_prior[1];
                for (std::size_t c = 0; c < x.cols; ++c) {
                    const double v0 = m.class_var.at(0, c), v1 = m.class_var.at(1, c);
                    const double d0 = row[c] - m.class_mean.at(0, c);
                    const double d1 = row[c] - m.class_mean.at(1, c);
                    lp0 += -0.5 * std::log(2.0 * M_PI * v0) - d0 * d0 / (2.0 * v0);
                    lp1 += -0.5 * std::log(2.0 * M_PI * v1) - d1 * d1 / (2.0 * v1);
                }
                out[r] = lp1 - lp0;
            }
            return out;
        }
        case Algorithm::RandomForest:
        case Algorithm::Hgbt:
        case Algorithm::RfReg:
            return tree_margins(m, x);
    }
    throw PredictionError("unreachable");
}

std::vector<double> predict_proba(const TrainedModel& m, const Matrix& x) {
    if (!m.is_classifier()) throw PredictionError("predict_proba: not a classifier");
    auto margins = predict_margin(m, x);
    if (m.spec.algorithm == Algorithm::RandomForest) {
        for (double& v : margins) v = std::clamp(v, 0.0, 1.0);
        return margins;
    }
    for (double& v : margins) v = detail::sigmoid(v);
    return margins;
}

std::vector<double> predict_value(const TrainedModel& m, const Matrix& x) {
    if (m.is_classifier()) throw PredictionError("predict_value: not a regressor");
    return predict_margin(m, x);
}

std::vector<double> tree_gain_importance(const TrainedModel& m) {
    if (!m.is_tree_model()) return {};
    std::vector<double> gains(m.feature_names.size(), 0.0);
    for (const auto& t : m.trees)
        for (const auto& nd : t.nodes)
            if (!nd.is_leaf()) gains[nd.feature] += nd.gain;
    return gains;
}

// ---------------------------------------------------------------------------
// hyperparameter spaces

std::vector<HyperRange> hyperparameter_space(Algorithm a, std::size_t n_rows,
                                             std::size_t n_cols) {
    (void)n_cols;
    const double min_leaf_hi = std::max<double>(1.0, std::floor(static_cast<double>(n_rows) / 50.0));
    switch (a) {
        case Algorithm::LogRegL1:
            return {{"lambda", 1e-4, 1e2, true, false}};
        case Algorithm::Gnb:
            return {{"var_smoothing_exp", -12, -6, false, true}};
        case Algorithm::RandomForest:
        case Algorithm::RfReg:
            return {{"n_trees", 100, 500, false, true}, {"min_leaf", 1, min_leaf_hi, false, true}};
        case Algorithm::Hgbt:
            return {{"learning_rate", 0.01, 0.3, true, false},
                    {"max_leaves", 7, 63, false, true},
                    {"n_iter", 50, 500, false, true},
                    {"l2", 1e-3, 10, true, false}};
        case Algorithm::LinearReg:
            return {};
    }
    return {};
}

ModelSpec sample_spec(Algorithm a, std::size_t n_rows, std::size_t n_cols, std::uint64_t seed) {
    ModelSpec spec;
    spec.algorithm = a;
    spec.seed = seed;
    Rng rng(derive_seed(seed, "hyper"));
    for (const auto& range : hyperparameter_space(a, n_rows, n_cols)) {
        double v;
        if (range.integer) {
            v = static_cast<double>(
                rng.int_range(static_cast<long long>(range.lo), static_cast<long long>(range.hi)));
        } else if (range.log_scale) {
            v = rng.log_uniform(range.lo, range.hi);
        } else {
            v = rng.uniform(range.lo, range.hi);
        }
        spec.hyperparameters[range.key] = v;
    }
    return spec;
}

ModelSpec default_spec(Algorithm a, std::uint64_t seed) {
    ModelSpec spec;
    spec.algorithm = a;
    spec.seed = seed;
    switch (a) {
        case Algorithm::LogRegL1: spec.hyperparameters = {{"lambda", 1e-2}}; break;
        case Algorithm::Gnb: spec.hyperparameters = {{"var_smoothing_exp", -9}}; break;
        case Algorithm::RandomForest:
        case Algorithm::RfReg:
            spec.hyperparameters = {{"n_trees", 300}, {"min_leaf", 3}};
            break;
        case Algorithm::Hgbt:
            spec.hyperparameters = {
                {"learning_rate", 0.1}, {"max_leaves", 31}, {"n_iter", 150}, {"l2", 1.0}};
            break;
        case Algorithm::LinearReg: break;
    }
    return spec;
}

// ---------------------------------------------------------------------------
// text serialization

std::string serialize_model(const TrainedModel& m) {
    std::ostringstream f;
    f << "mait_model v1\n";
    f << "algorithm " << to_string(m.spec.algorithm) << "\n";
    f << "seed " << m.spec.seed << "\n";
    for (const auto& [k, v] : m.spec.hyperparameters) f << "hyper " << k << ' ' << fmt_num(v) << "\n";
    f << "features " << m.feature_names.size() << "\n";
    for (std::size_t i = 0; i < m.feature_names.size(); ++i)
        f << "feature " << i << ' ' << m.feature_names[i] << "\n";
    f << "intercept " << fmt_num(m.intercept) << "\n";
    for (std::size_t i = 0; i < m.coefficients.size(); ++i)
        f << "coef " << i << ' ' << fmt_num(m.coefficients[i]) << "\n";
    for (std::size_t i = 0; i < m.class_log_prior.size(); ++i)
        f << "gnb_log_prior " << i << ' ' << fmt_num(m.class_log_prior[i]) << "\n";
    for (std::size_t c = 0; c < m.class_mean.rows; ++c)
        for (std::size_t j = 0; j < m.class_mean.cols; ++j)
            f << "gnb_moments " << c << ' ' << j << ' ' << fmt_num(m.class_mean.at(c, j)) << ' '
              << fmt_num(m.class_var.at(c, j)) << "\n";
    f << "base_score " << fmt_num(m.base_score) << "\n";
    f << "tree_scale " << fmt_num(m.tree_scale) << "\n";
    f << "trees " << m.trees.size() << "\n";
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        f << "tree " << t << " nodes " << m.trees[t].nodes.size() << "\n";
        for (std::size_t i = 0; i < m.trees[t].nodes.size(); ++i) {
            const TreeNode& nd = m.trees[t].nodes[i];
            f << "node " << i << ' ' << nd.feature << ' ' << fmt_num(nd.threshold) << ' '
              << nd.left << ' ' << nd.right << ' ' << (nd.default_left ? 1 : 0) << ' '
              << fmt_num(nd.value) << ' ' << fmt_num(nd.cover) << ' ' << fmt_num(nd.gain) << "\n";
        }
    }
    f << "end\n";
    return f.str();
}

void save_model(const TrainedModel& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write model file: " + path);
    f << serialize_model(m);
}

TrainedModel deserialize_model(const std::string& text) {
    std::istringstream f(text);
    std::string line;
    if (!std::getline(f, line) || line != "mait_model v1")
        throw IoError("unrecognized model format");

    TrainedModel m;
    Tree* cur_tree = nullptr;
    while (std::getline(f, line)) {
        if (line == "end") break;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "algorithm") {
            std::string a;
            ss >> a;
            auto alg = algorithm_from_string(a);
            if (!alg) throw IoError("unknown algorithm: " + a);
            m.spec.algorithm = *alg;
        } else if (key == "seed") {
            ss >> m.spec.seed;
        } else if (key == "hyper") {
            std::string k;
            double v;
            ss >> k >> v;
            m.spec.hyperparameters[k] = v;
        } else if (key == "features") {
            std::size_t n;
            ss >> n;
            m.feature_names.resize(n);
        } else if (key == "feature") {
            std::size_t i;
            ss >> i;
            std::string name;
            std::getline(ss, name);
            if (!name.empty() && name[0] == ' ') name.erase(0, 1);
            m.feature_names[i] = name;
        } else if (key == "intercept") {
            ss >> m.intercept;
        } else if (key == "coef") {
            std::size_t i;
            double v;
            ss >> i >> v;
            if (m.coefficients.size() <= i) m.coefficients.resize(i + 1, 0.0);
            m.coefficients[i] = v;
        } else if (key == "gnb_log_prior") {
            std::size_t i;
            double v;
            ss >> i >> v;
            if (m.class_log_prior.size() <= i) m.class_log_prior.resize(i + 1, 0.0);
            m.class_log_prior[i] = v;
        } else if (key == "gnb_moments") {
            std::size_t c, j;
            double mu, var;
            ss >> c >> j >> mu >> var;
            if (m.class_mean.rows == 0) {
                m.class_mean = Matrix(2, m.feature_names.size());
                m.class_var = Matrix(2, m.feature_names.size());
            }
            m.class_mean.at(c, j) = mu;
            m.class_var.at(c, j) = var;
        } else if (key == "base_score") {
            ss >> m.base_score;
        } else if (key == "tree_scale") {
            ss >> m.tree_scale;
        } else if (key == "trees") {
            std::size_t n;
            ss >> n;
            m.trees.resize(n);
        } else if (key == "tree") {
            std::size_t t, n;
            std::string tok;
            ss >> t >> tok >> n;
            m.trees[t].nodes.resize(n);
            cur_tree = &m.trees[t];
        } else if (key == "node") {
            if (!cur_tree) throw IoError("node record before tree record");
            std::size_t i;
            int dl;
            TreeNode nd;
            ss >> i >> nd.feature >> nd.threshold >> nd.left >> nd.right >> dl >> nd.value >>
                nd.cover >> nd.gain;
            nd.default_left = dl != 0;
            cur_tree->nodes[i] = nd;
        } else {
            throw IoError("unrecognized model record: " + key);
        }
    }
    return m;
}

TrainedModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return deserialize_model(ss.str());
}

} // namespace mait
