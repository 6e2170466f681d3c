#include "mait/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mait/error.hpp"
#include "mait/eval.hpp"
#include "mait/explain.hpp"
#include "mait/feature_select.hpp"
#include "mait/parallel.hpp"
#include "mait/quality.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"
#include "mait/survival.hpp"
#include "mait/table.hpp"

namespace mait {

namespace {

template <class F>
auto with_stage(const char* stage, F&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + stage + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string("stage ") + stage + ": " + e.what());
    } catch (const Error& e) {
        throw Error(std::string("stage ") + stage + ": " + e.what());
    }
}

std::vector<std::string> read_header(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<std::string> names;
    std::string cur;
    bool in_quotes = false;
    for (char c : line) {
        if (in_quotes) {
            if (c == '"') in_quotes = false;
            else cur.push_back(c);
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == delim) {
            names.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    names.push_back(cur);
    return names;
}

} // namespace

std::vector<ColumnSpec> config_column_specs(const PipelineConfig& cfg, const std::string& path) {
    const auto header = read_header(path);
    std::vector<ColumnSpec> specs;
    for (const auto& name : header) {
        ColumnSpec spec;
        spec.name = name;
        spec.kind = ColumnKind::Continuous;
        if (cfg.classify && name == cfg.outcome) spec.kind = ColumnKind::BinaryOutcome;
        else if (cfg.regression && name == cfg.continuous_outcome)
            spec.kind = ColumnKind::ContinuousOutcome;
        else if (cfg.survival && name == cfg.time_column) spec.kind = ColumnKind::TimeToEvent;
        else if (cfg.survival && name == cfg.event_column) spec.kind = ColumnKind::EventIndicator;
        else if (std::find(cfg.categorical.begin(), cfg.categorical.end(), name) !=
                 cfg.categorical.end())
            spec.kind = ColumnKind::Categorical;
        else if (std::find(cfg.identifier.begin(), cfg.identifier.end(), name) !=
                 cfg.identifier.end())
            spec.kind = ColumnKind::Identifier;
        specs.push_back(std::move(spec));
    }
    auto require = [&](const std::string& col, const char* what) {
        if (col.empty()) return;
        if (std::find(header.begin(), header.end(), col) == header.end())
            throw ConfigError(std::string("config: ") + what + " column \"" + col +
                              "\" not present in " + path);
    };
    if (cfg.classify) require(cfg.outcome, "outcome");
    if (cfg.regression) require(cfg.continuous_outcome, "continuous_outcome");
    if (cfg.survival) {
        require(cfg.time_column, "time");
        require(cfg.event_column, "event");
    }
    for (const auto& col : cfg.stratify_columns) require(col, "stratify");
    return specs;
}

namespace {

struct FeatureView {
    Matrix x;
    std::vector<std::string> names;
};

FeatureView feature_view(const Table& t) {
    auto [m, names] = t.continuous_features();
    return {std::move(m), std::move(names)};
}

std::vector<int> outcome_labels(const Table& t, const std::string& col) {
    const Column& c = t.column(col);
    std::vector<int> y(t.row_count());
    for (std::size_t r = 0; r < t.row_count(); ++r)
        y[r] = c.missing[r] ? kUnknownLabel : static_cast<int>(c.num[r]);
    return y;
}

std::string fmt_flagged(double v, bool defined) { return defined ? fmt_num(v) : "NA"; }

TableData metric_table(const std::string& name, const std::string& title, const MetricSet& m) {
    TableData t;
    t.name = name;
    t.title = title;
    t.header = {"metric", "value"};
    t.rows = {
        {"threshold", fmt_num(m.threshold)},
        {"auc", fmt_flagged(m.auc, m.auc_defined)},
        {"pr_auc", fmt_flagged(m.pr_auc, m.pr_auc_defined)},
        {"mcc", fmt_num(m.mcc)},
        {"ppv", fmt_flagged(m.ppv, m.ppv_defined)},
        {"npv", fmt_flagged(m.npv, m.npv_defined)},
        {"sensitivity", fmt_num(m.sensitivity)},
        {"specificity", fmt_num(m.specificity)},
        {"f1", fmt_flagged(m.f1, m.f1_defined)},
        {"balanced_accuracy", fmt_num(m.balanced_accuracy)},
        {"brier", fmt_num(m.brier)},
        {"tp", fmt_num(m.tp)},
        {"fp", fmt_num(m.fp)},
        {"tn", fmt_num(m.tn)},
        {"fn", fmt_num(m.fn)},
    };
    return t;
}

svg::Series roc_series(std::span<const int> y, std::span<const double> p,
                       const std::string& label) {
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    double n1 = 0, n0 = 0;
    for (int v : y) (v == 1 ? n1 : n0) += 1;
    svg::Series s;
    s.label = label;
    s.x = {0.0};
    s.y = {0.0};
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && p[order[j + 1]] == p[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) (y[order[k]] == 1 ? tp : fp) += 1;
        s.x.push_back(n0 > 0 ? fp / n0 : 0.0);
        s.y.push_back(n1 > 0 ? tp / n1 : 0.0);
        i = j + 1;
    }
    return s;
}

svg::Series pr_series(std::span<const int> y, std::span<const double> p,
                      const std::string& label) {
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    double n1 = 0;
    for (int v : y) n1 += v == 1;
    svg::Series s;
    s.label = label;
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && p[order[j + 1]] == p[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) (y[order[k]] == 1 ? tp : fp) += 1;
        s.x.push_back(n1 > 0 ? tp / n1 : 0.0);
        s.y.push_back(tp + fp > 0 ? tp / (tp + fp) : 1.0);
        i = j + 1;
    }
    return s;
}

// one-hot blocks aggregate back onto their source column for display
std::pair<std::vector<std::string>, std::vector<double>> group_importance(
    const std::vector<std::string>& names, const ShapMatrix& shap) {
    std::vector<std::string> display;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t f = 0; f < names.size(); ++f) {
        const auto eq = names[f].find('=');
        const std::string base = eq == std::string::npos ? names[f] : names[f].substr(0, eq);
        if (!groups.count(base)) display.push_back(base);
        groups[base].push_back(f);
    }
    std::vector<double> agg(display.size(), 0.0);
    for (std::size_t d = 0; d < display.size(); ++d) {
        const auto& members = groups[display[d]];
        for (std::size_t r = 0; r < shap.values.rows; ++r) {
            double signed_sum = 0.0;
            for (std::size_t f : members) signed_sum += shap.values.at(r, f);
            agg[d] += std::fabs(signed_sum);
        }
        if (shap.values.rows) agg[d] /= static_cast<double>(shap.values.rows);
    }
    return {display, agg};
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return v;
}

double rmse(std::span<const double> y, std::span<const double> p) {
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ss += (y[i] - p[i]) * (y[i] - p[i]);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> p) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - p[i]);
    return s / static_cast<double>(y.size());
}

double r_squared(std::span<const double> y, std::span<const double> p) {
    const double m = mean(y);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - p[i]) * (y[i] - p[i]);
        ss_tot += (y[i] - m) * (y[i] - m);
    }
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

Matrix seeded_row_sample(const Matrix& x, std::size_t max_rows, std::uint64_t seed) {
    if (x.rows <= max_rows) return x;
    Rng rng(seed);
    std::vector<std::size_t> idx(x.rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_rows; ++i) std::swap(idx[i], idx[i + rng.index(x.rows - i)]);
    idx.resize(max_rows);
    std::sort(idx.begin(), idx.end());
    return x.take_rows(idx);
}

} // namespace

PipelineOutcome run_pipeline(const PipelineConfig& cfg) {
    set_thread_budget(cfg.threads);
    PipelineOutcome out;
    out.bundle.provenance.config_hash = cfg.config_hash;
    out.bundle.provenance.seed = cfg.seed;
    out.bundle.provenance.threads = cfg.threads;
    auto& sections = out.bundle.sections;

    // ----- settings echo ---------------------------------------------------
    {
        ReportSection s;
        s.id = "settings";
        s.title = "Settings";
        TableData t;
        t.name = "settings";
        t.title = "Run configuration";
        t.header = {"key", "value"};
        auto add = [&](const std::string& k, const std::string& v) { t.rows.push_back({k, v}); };
        add("development", cfg.development_path);
        add("external_test", cfg.external_test_path.empty() ? "(split)" : cfg.external_test_path);
        add("modes", std::string(cfg.classify ? "classify " : "") +
                         (cfg.survival ? "survival " : "") + (cfg.regression ? "regression" : ""));
        add("test_fraction", fmt_num(cfg.test_fraction));
        add("k_folds", fmt_num(static_cast<long long>(cfg.k_folds)));
        add("n_search_iter", fmt_num(static_cast<long long>(cfg.n_search_iter)));
        add("inner_folds", fmt_num(static_cast<long long>(cfg.inner_folds)));
        add("tuning", cfg.tuning ? "true" : "false");
        add("objective", cfg.objective);
        {
            std::string cands;
            for (const auto& c : cfg.candidates) cands += c + " ";
            add("candidates", cands);
        }
        add("feature_selection",
            cfg.feature_selection ? "k=" + std::to_string(cfg.feature_k) : "off");
        add("scaling", cfg.scaling ? "true" : "false");
        add("calibration", cfg.calibration ? "true" : "false");
        add("conformal", cfg.conformal ? "alpha=" + fmt_num(cfg.conformal_alpha) : "off");
        add("threshold_tuning", cfg.threshold_tuning ? "true" : "false");
        add("oversampling", cfg.oversampling ? "true" : "false");
        add("label_propagation", cfg.label_propagation ? "true" : "false");
        add("uncertainty_filter", cfg.uncertainty_filter ? "true" : "false");
        add("clustering", cfg.clustering ? "true" : "false");
        add("seed", fmt_num(static_cast<long long>(cfg.seed)));
        // the thread budget must not leak into CSV output: identical runs at
        // different budgets are byte-identical by contract (it is still
        // recorded in the HTML provenance block)
        add("config_hash", cfg.config_hash);
        s.tables.push_back(std::move(t));
        sections.push_back(std::move(s));
    }

    // ----- load ------------------------------------------------------------
    Table dev = with_stage("load", [&] {
        const auto specs = config_column_specs(cfg, cfg.development_path);
        Table t = load_table(cfg.development_path, specs);
        const auto violations = validate_table(t);
        if (!violations.empty()) {
            std::string msg = "input data violates table invariants:";
            for (const auto& v : violations) {
                msg += " [" + v.code + " column=" + v.column +
                       (v.row >= 0 ? " row=" + std::to_string(v.row) : "") + "]";
            }
            throw DataError(msg);
        }
        return t;
    });

    // drop rows with missing enabled outcomes (unless propagation handles
    // the binary outcome)
    dev = with_stage("load", [&] {
        std::vector<std::size_t> keep;
        for (std::size_t r = 0; r < dev.row_count(); ++r) {
            bool ok = true;
            if (cfg.classify && !cfg.label_propagation && dev.column(cfg.outcome).missing[r])
                ok = false;
            if (cfg.survival &&
                (dev.column(cfg.time_column).missing[r] || dev.column(cfg.event_column).missing[r]))
                ok = false;
            if (cfg.regression && dev.column(cfg.continuous_outcome).missing[r]) ok = false;
            if (ok) keep.push_back(r);
        }
        if (keep.size() == dev.row_count()) return dev;
        return dev.take_rows(keep);
    });

    // ----- quality ---------------------------------------------------------
    with_stage("quality", [&] {
        ReportSection s;
        s.id = "quality";
        s.title = "Data quality";
        const auto profile = quality_profile(dev, cfg.variance_eps, cfg.rare_min_fraction);
        TableData t;
        t.name = "quality_columns";
        t.title = "Column quality profile";
        t.header = {"column", "kind", "missing_fraction", "near_constant", "rare_categories"};
        for (std::size_t c = 0; c < dev.column_count(); ++c) {
            const auto& col = dev.column(c);
            const bool near_const =
                std::find(profile.near_constant_columns.begin(),
                          profile.near_constant_columns.end(),
                          col.spec.name) != profile.near_constant_columns.end();
            std::string rare;
            auto it = profile.rare_categories.find(col.spec.name);
            if (it != profile.rare_categories.end())
                for (const auto& cat : it->second) rare += cat + " ";
            t.rows.push_back({col.spec.name, to_string(col.spec.kind),
                              fmt_num(profile.column_missing_fraction[c]),
                              near_const ? "yes" : "no", rare});
        }
        s.tables.push_back(std::move(t));

        TableData rt;
        rt.name = "quality_row_missingness";
        rt.title = "Row missingness summary";
        rt.header = {"statistic", "value"};
        double mx = 0.0;
        for (double f : profile.row_missing_fraction) mx = std::max(mx, f);
        rt.rows = {{"rows", fmt_num(dev.row_count())},
                   {"mean_row_missing_fraction", fmt_num(mean(profile.row_missing_fraction))},
                   {"max_row_missing_fraction", fmt_num(mx)}};
        s.tables.push_back(std::move(rt));
        sections.push_back(std::move(s));
        return 0;
    });

    // ----- associations (classification outcome only) ----------------------
    if (cfg.classify) {
        with_stage("associations", [&] {
            ReportSection s;
            s.id = "associations";
            s.title = "Associations";
            const auto rep = associations(dev, cfg.outcome, cfg.quality_bootstrap,
                                          cfg.confidence, derive_seed(cfg.seed, "assoc"));

            TableData sm;
            sm.name = "associations_spearman";
            sm.title = "Spearman rank correlations";
            sm.header = {"column"};
            for (const auto& n : rep.spearman.names) sm.header.push_back(n);
            for (std::size_t i = 0; i < rep.spearman.names.size(); ++i) {
                std::vector<std::string> row{rep.spearman.names[i]};
                for (std::size_t j = 0; j < rep.spearman.names.size(); ++j)
                    row.push_back(fmt_num(rep.spearman.rho.at(i, j)));
                sm.rows.push_back(std::move(row));
            }
            s.tables.push_back(std::move(sm));

            TableData oa;
            oa.name = "associations_outcome";
            oa.title = "Feature-outcome associations (bootstrap " +
                       std::to_string(cfg.quality_bootstrap) + ", confidence " +
                       fmt_num(cfg.confidence) + ")";
            oa.header = {"feature",  "point_biserial", "pb_lo", "pb_hi",
                         "mutual_information", "mi_lo", "mi_hi"};
            for (const auto& e : rep.outcome_associations) {
                oa.rows.push_back(
                    {e.feature,
                     e.has_point_biserial ? fmt_num(e.point_biserial.estimate) : "NA",
                     e.has_point_biserial ? fmt_num(e.point_biserial.lo) : "NA",
                     e.has_point_biserial ? fmt_num(e.point_biserial.hi) : "NA",
                     fmt_num(e.mutual_information.estimate), fmt_num(e.mutual_information.lo),
                     fmt_num(e.mutual_information.hi)});
            }
            s.tables.push_back(std::move(oa));

            Figure heat;
            heat.name = "fig_correlation_heatmap";
            heat.title = "Spearman rank correlation heatmap";
            heat.svg = svg::heatmap("Spearman correlation", rep.spearman.names, rep.spearman.rho);
            s.figures.push_back(std::move(heat));
            sections.push_back(std::move(s));
            return 0;
        });
    }

    // ----- split -----------------------------------------------------------
    Table train_raw, test_raw;
    with_stage("split", [&] {
        ReportSection s;
        s.id = "split";
        s.title = "Data splitting";
        if (!cfg.external_test_path.empty()) {
            const auto specs = config_column_specs(cfg, cfg.external_test_path);
            train_raw = dev;
            test_raw = load_table(cfg.external_test_path, specs);
            s.paragraphs.push_back("External test set: " + cfg.external_test_path + " (" +
                                   std::to_string(test_raw.row_count()) + " rows).");
        } else {
            const auto strata =
                composite_key(dev, cfg.stratify_columns, cfg.stratify_quantile_bins);
            const auto plan = stratified_split(dev, strata, cfg.test_fraction, cfg.seed);
            train_raw = dev.take_rows(plan.train_indices);
            test_raw = dev.take_rows(plan.test_indices);

            TableData t;
            t.name = "split_assignment";
            t.title = "Split assignment";
            t.header = {"row", "stratum", "split"};
            std::vector<std::string> assign(dev.row_count(), "train");
            for (std::size_t i : plan.test_indices) assign[i] = "test";
            for (std::size_t r = 0; r < dev.row_count(); ++r)
                t.rows.push_back({fmt_num(r), strata[r], assign[r]});
            s.tables.push_back(std::move(t));
            s.paragraphs.push_back("Stratified split, test fraction " +
                                   fmt_num(cfg.test_fraction) + ": " +
                                   std::to_string(train_raw.row_count()) + " train / " +
                                   std::to_string(test_raw.row_count()) + " test rows.");
        }
        sections.push_back(std::move(s));
        return 0;
    });

    // ----- preprocess (fit on train only) -----------------------------------
    Table train = train_raw, test = test_raw;
    with_stage("preprocess", [&] {
        ReportSection s;
        s.id = "preprocess";
        s.title = "Preprocessing";

        const auto rare = fit_rare_merge(train, cfg.rare_min_fraction, "train");
        out.fit_log.push_back(rare.provenance);
        train = apply_rare_merge(rare, train);
        test = apply_rare_merge(rare, test);

        const auto onehot = fit_one_hot(train, "train");
        out.fit_log.push_back(onehot.provenance);
        train = apply_one_hot(onehot, train);
        test = apply_one_hot(onehot, test);

        const auto impute = fit_knn_impute(train, cfg.knn_k, "train");
        out.fit_log.push_back(impute.provenance);
        train = apply_knn_impute(impute, train);
        test = apply_knn_impute(impute, test);

        if (cfg.scaling) {
            const auto scale = fit_robust_scale(train, "train");
            out.fit_log.push_back(scale.provenance);
            train = apply_robust_scale(scale, train);
            test = apply_robust_scale(scale, test);

            TableData t;
            t.name = "scaling_parameters";
            t.title = "Robust scaling parameters (train-fit)";
            t.header = {"column", "median", "iqr", "flagged_constant"};
            for (std::size_t i = 0; i < scale.names.size(); ++i)
                t.rows.push_back({scale.names[i], fmt_num(scale.median[i]),
                                  fmt_num(scale.iqr[i]), scale.flagged[i] ? "yes" : "no"});
            s.tables.push_back(std::move(t));
        }
        s.paragraphs.push_back(
            "Transforms fit on the training split only: rare-category merge, one-hot "
            "encoding, kNN imputation (k=" +
            std::to_string(cfg.knn_k) + ")" + (cfg.scaling ? ", IQR scaling." : "."));

        // isolation forest on the preprocessed feature space
        const auto ftrain = feature_view(train);
        const auto ftest = feature_view(test);
        const auto forest = IsolationForest::fit(ftrain.x, cfg.isolation_trees,
                                                 cfg.isolation_subsample,
                                                 derive_seed(cfg.seed, "isolation"));
        const auto train_scores = forest.score(ftrain.x);
        const auto test_scores = forest.score(ftest.x);
        TableData iso;
        iso.name = "isolation_scores";
        iso.title = "Isolation forest anomaly scores";
        iso.header = {"split", "row", "score"};
        for (std::size_t r = 0; r < train_scores.size(); ++r)
            iso.rows.push_back({"train", fmt_num(r), fmt_num(train_scores[r])});
        for (std::size_t r = 0; r < test_scores.size(); ++r)
            iso.rows.push_back({"test", fmt_num(r), fmt_num(test_scores[r])});
        s.tables.push_back(std::move(iso));
        sections.push_back(std::move(s));
        return 0;
    });

    // ----- optional label propagation ---------------------------------------
    if (cfg.classify && cfg.label_propagation) {
        with_stage("label_propagation", [&] {
            ReportSection s;
            s.id = "label_propagation";
            s.title = "Label propagation";
            auto ftrain = feature_view(train);
            auto y = outcome_labels(train, cfg.outcome);
            const std::size_t unknown =
                static_cast<std::size_t>(std::count(y.begin(), y.end(), kUnknownLabel));
            if (unknown == 0) {
                s.paragraphs.push_back("No unknown outcome labels; propagation skipped.");
            } else {
                double sigma = cfg.label_prop_sigma;
                if (sigma <= 0.0) sigma = median_pairwise_distance(ftrain.x);
                if (sigma <= 0.0) sigma = 1.0;
                const auto prop = propagate_labels(ftrain.x, y, sigma);
                Column& oc = train.column(cfg.outcome);
                TableData t;
                t.name = "label_propagation";
                t.title = "Propagated labels (sigma=" + fmt_num(sigma) + ")";
                t.header = {"row", "label", "confidence"};
                for (std::size_t r = 0; r < train.row_count(); ++r) {
                    if (y[r] != kUnknownLabel) continue;
                    oc.num[r] = prop.labels[r];
                    oc.missing[r] = 0;
                    t.rows.push_back(
                        {fmt_num(r), fmt_num(static_cast<long long>(prop.labels[r])),
                         fmt_num(prop.confidence[r])});
                }
                s.paragraphs.push_back("Filled " + std::to_string(unknown) +
                                       " unknown training labels in " +
                                       std::to_string(prop.iterations) + " iterations.");
                s.tables.push_back(std::move(t));
            }
            sections.push_back(std::move(s));
            return 0;
        });
        // test rows with unknown outcomes cannot be evaluated
        std::vector<std::size_t> keep;
        const Column& oc = test.column(cfg.outcome);
        for (std::size_t r = 0; r < test.row_count(); ++r)
            if (!oc.missing[r]) keep.push_back(r);
        if (keep.size() != test.row_count()) test = test.take_rows(keep);
    }

    // ----- optional mRMR feature selection ----------------------------------
    if (cfg.classify && cfg.feature_selection) {
        with_stage("feature_selection", [&] {
            ReportSection s;
            s.id = "feature_selection";
            s.title = "Feature selection (mRMR)";
            const auto ftrain = feature_view(train);
            const auto y = outcome_labels(train, cfg.outcome);
            const auto ranking = mrmr_rank(ftrain.x, ftrain.names, y, cfg.feature_k);
            TableData t;
            t.name = "mrmr_ranking";
            t.title = "mRMR ranking (k=" + std::to_string(cfg.feature_k) + ")";
            t.header = {"step", "feature", "relevance", "redundancy", "score"};
            for (std::size_t i = 0; i < ranking.names.size(); ++i)
                t.rows.push_back({fmt_num(i + 1), ranking.names[i], fmt_num(ranking.relevance[i]),
                                  fmt_num(ranking.redundancy[i]), fmt_num(ranking.score[i])});
            s.tables.push_back(std::move(t));
            train = apply_ranking(train, ranking);
            test = apply_ranking(test, ranking);
            sections.push_back(std::move(s));
            return 0;
        });
    }

    // ----- classification branch -------------------------------------------
    if (cfg.classify) {
        const auto ftrain = feature_view(train);
        const auto ftest = feature_view(test);
        const auto y_train = outcome_labels(train, cfg.outcome);
        const auto y_test = outcome_labels(test, cfg.outcome);

        std::vector<Algorithm> candidates;
        for (const auto& name : cfg.candidates) candidates.push_back(*algorithm_from_string(name));

        CVOptions cv_opts;
        cv_opts.k_folds = cfg.k_folds;
        cv_opts.n_search_iter = cfg.n_search_iter;
        cv_opts.inner_folds = cfg.inner_folds;
        cv_opts.tuning_enabled = cfg.tuning;
        cv_opts.threshold_tuning = cfg.threshold_tuning;
        cv_opts.objective = cfg.objective == "auc" ? Objective::Auc : Objective::PrAuc;
        cv_opts.seed = derive_seed(cfg.seed, "cv");
        cv_opts.oversample = cfg.oversampling;

        const CVResult cv = with_stage("cross_validation", [&] {
            return cross_validate(candidates, ftrain.x, y_train, cv_opts);
        });
        const Algorithm winner = select_best(cv);
        const CandidateResult* winner_result = nullptr;
        for (const auto& c : cv.candidates)
            if (c.algorithm == winner) winner_result = &c;
        const double final_threshold = winner_result->trace.final_threshold;

        with_stage("cross_validation", [&] {
            ReportSection s;
            s.id = "cv";
            s.title = "Cross-validation";
            TableData t;
            t.name = "cv_metrics";
            t.title = "Per-fold metrics (threshold applied per fold)";
            t.header = {"algorithm", "fold", "threshold", "auc", "pr_auc", "mcc", "ppv", "npv",
                        "sensitivity", "specificity", "f1", "balanced_accuracy", "brier",
                        "tp", "fp", "tn", "fn"};
            for (const auto& cand : cv.candidates) {
                for (std::size_t f = 0; f < cand.folds.size(); ++f) {
                    const MetricSet& m = cand.folds[f].metrics;
                    t.rows.push_back({to_string(cand.algorithm), fmt_num(f + 1),
                                      fmt_num(m.threshold), fmt_flagged(m.auc, m.auc_defined),
                                      fmt_flagged(m.pr_auc, m.pr_auc_defined), fmt_num(m.mcc),
                                      fmt_flagged(m.ppv, m.ppv_defined),
                                      fmt_flagged(m.npv, m.npv_defined), fmt_num(m.sensitivity),
                                      fmt_num(m.specificity), fmt_flagged(m.f1, m.f1_defined),
                                      fmt_num(m.balanced_accuracy), fmt_num(m.brier),
                                      fmt_num(m.tp), fmt_num(m.fp), fmt_num(m.tn),
                                      fmt_num(m.fn)});
                }
            }
            s.tables.push_back(std::move(t));

            TableData summ;
            summ.name = "cv_summary";
            summ.title = "Candidate grand averages (mean of MCC, AUC, PR-AUC over folds)";
            summ.header = {"algorithm", "grand_average", "mean_auc", "sd_auc", "mean_mcc",
                           "sd_mcc", "mean_pr_auc", "sd_pr_auc", "final_threshold"};
            for (const auto& cand : cv.candidates) {
                std::vector<double> aucs, mccs, prs;
                for (const auto& f : cand.folds) {
                    aucs.push_back(f.metrics.auc);
                    mccs.push_back(f.metrics.mcc);
                    prs.push_back(f.metrics.pr_auc);
                }
                summ.rows.push_back({to_string(cand.algorithm), fmt_num(cand.grand_average),
                                     fmt_num(mean(aucs)),
                                     fmt_num(std::sqrt(sample_variance(aucs))), fmt_num(mean(mccs)),
                                     fmt_num(std::sqrt(sample_variance(mccs))), fmt_num(mean(prs)),
                                     fmt_num(std::sqrt(sample_variance(prs))),
                                     fmt_num(cand.trace.final_threshold)});
            }
            s.tables.push_back(std::move(summ));

            TableData preds;
            preds.name = "cv_predictions";
            preds.title = "Per-fold held-out predictions";
            preds.header = {"algorithm", "fold", "row", "y", "p"};
            for (const auto& cand : cv.candidates)
                for (std::size_t f = 0; f < cand.folds.size(); ++f)
                    for (std::size_t i = 0; i < cand.folds[f].holdout.size(); ++i)
                        preds.rows.push_back({to_string(cand.algorithm), fmt_num(f + 1),
                                              fmt_num(cand.folds[f].holdout[i]),
                                              fmt_num(static_cast<long long>(cand.folds[f].y[i])),
                                              fmt_num(cand.folds[f].p[i])});
            s.tables.push_back(std::move(preds));
            sections.push_back(std::move(s));
            return 0;
        });

        // threshold trace section
        if (cfg.threshold_tuning) {
            ReportSection s;
            s.id = "threshold";
            s.title = "Probability threshold tuning";
            TableData t;
            t.name = "threshold_trace";
            t.title = "Threshold trace for " + std::string(to_string(winner));
            t.header = {"fold", "estimate", "applied"};
            t.rows.push_back({"initial", "", fmt_num(winner_result->trace.initial)});
            for (std::size_t f = 0; f < winner_result->trace.estimates.size(); ++f)
                t.rows.push_back({fmt_num(f + 1), fmt_num(winner_result->trace.estimates[f]),
                                  fmt_num(winner_result->trace.applied[f])});
            t.rows.push_back({"final", fmt_num(final_threshold), ""});
            s.tables.push_back(std::move(t));

            Figure fig;
            fig.name = "fig_threshold_trace";
            fig.title = "Per-fold threshold estimates and applied values";
            svg::Series est{"estimate", {}, {}, "", false}, app{"applied", {}, {}, "", false};
            for (std::size_t f = 0; f < winner_result->trace.estimates.size(); ++f) {
                if (!std::isnan(winner_result->trace.estimates[f])) {
                    est.x.push_back(static_cast<double>(f + 1));
                    est.y.push_back(winner_result->trace.estimates[f]);
                }
                app.x.push_back(static_cast<double>(f + 1));
                app.y.push_back(winner_result->trace.applied[f]);
            }
            fig.svg = svg::line_chart("Threshold trace", "fold", "threshold", {est, app});
            s.figures.push_back(std::move(fig));
            sections.push_back(std::move(s));
        }

        // ----- final refit + test evaluation --------------------------------
        TrainedModel final_model = with_stage("final_fit", [&] {
            const std::uint64_t fit_seed = derive_seed(cfg.seed, "final_fit");
            ModelSpec spec;
            if (cfg.tuning) {
                const auto cw = class_weights(y_train);
                std::vector<double> w(y_train.size());
                for (std::size_t i = 0; i < y_train.size(); ++i) w[i] = cw.at(y_train[i]);
                spec = random_search(winner, ftrain.x, y_train, w, cfg.n_search_iter,
                                     cfg.inner_folds, cv_opts.objective,
                                     derive_seed(cfg.seed, "final_search"))
                           .best;
            } else {
                spec = default_spec(winner, fit_seed);
            }
            spec.seed = fit_seed;
            Matrix fit_x = ftrain.x;
            std::vector<int> fit_y = y_train;
            if (cfg.oversampling) {
                auto os = random_oversample(fit_x, fit_y, derive_seed(cfg.seed, "final_oversample"));
                fit_x = std::move(os.x);
                fit_y = std::move(os.y);
            }
            const auto cw = class_weights(fit_y);
            std::vector<double> w(fit_y.size());
            for (std::size_t i = 0; i < fit_y.size(); ++i) w[i] = cw.at(fit_y[i]);
            auto model = fit_classifier(spec, fit_x, fit_y, w);
            model.feature_names = ftrain.names;
            return model;
        });
        out.bundle.models.push_back(
            {"final_" + std::string(to_string(winner)), serialize_model(final_model)});

        const auto p_test = predict_proba(final_model, ftest.x);
        const auto test_metrics = compute_metrics(y_test, p_test, final_threshold);
        const auto test_metrics_05 = compute_metrics(y_test, p_test, 0.5);

        {
            ReportSection s;
            s.id = "selected_model";
            s.title = "Selected model";
            TableData t;
            t.name = "selected_model";
            t.title = "Winner and tuned hyperparameters";
            t.header = {"key", "value"};
            t.rows.push_back({"algorithm", to_string(winner)});
            t.rows.push_back({"grand_average", fmt_num(winner_result->grand_average)});
            t.rows.push_back({"threshold", fmt_num(final_threshold)});
            for (const auto& [k, v] : final_model.spec.hyperparameters)
                t.rows.push_back({"hyper." + k, fmt_num(v)});
            s.tables.push_back(std::move(t));
            sections.push_back(std::move(s));
        }
        {
            ReportSection s;
            s.id = "test_eval";
            s.title = "Test-set evaluation";
            s.tables.push_back(metric_table("test_metrics",
                                            "Test metrics at tuned threshold " +
                                                fmt_num(final_threshold),
                                            test_metrics));
            s.tables.push_back(
                metric_table("test_metrics_at_half", "Test metrics at threshold 0.5",
                             test_metrics_05));
            TableData preds;
            preds.name = "test_predictions";
            preds.title = "Test-set predictions";
            preds.header = {"row", "y", "p", "predicted"};
            for (std::size_t r = 0; r < y_test.size(); ++r)
                preds.rows.push_back({fmt_num(r), fmt_num(static_cast<long long>(y_test[r])),
                                      fmt_num(p_test[r]),
                                      p_test[r] >= final_threshold ? "1" : "0"});
            s.tables.push_back(std::move(preds));

            Figure roc;
            roc.name = "fig_roc";
            roc.title = "ROC curve (test set), AUC = " + fmt_num(test_metrics.auc);
            roc.svg = svg::line_chart("ROC curve", "false positive rate", "true positive rate",
                                      {roc_series(y_test, p_test, to_string(winner))}, true);
            s.figures.push_back(std::move(roc));
            Figure pr;
            pr.name = "fig_pr";
            pr.title = "Precision-recall curve (test set), AP = " + fmt_num(test_metrics.pr_auc);
            pr.svg = svg::line_chart("Precision-recall curve", "recall", "precision",
                                     {pr_series(y_test, p_test, to_string(winner))});
            s.figures.push_back(std::move(pr));
            Figure cm;
            cm.name = "fig_confusion";
            cm.title = "Confusion matrix at tuned threshold";
            cm.svg = svg::confusion_matrix("Confusion matrix (test)", test_metrics.tp,
                                           test_metrics.fp, test_metrics.tn, test_metrics.fn);
            s.figures.push_back(std::move(cm));
            sections.push_back(std::move(s));
        }

        // ----- calibration + conformal --------------------------------------
        if (cfg.calibration || cfg.conformal) {
            with_stage("calibration", [&] {
                ReportSection s;
                s.id = "calibration";
                s.title = "Calibration and conformal prediction";

                // stratified 80/20 re-split of the training data
                std::vector<std::string> strata(y_train.size());
                for (std::size_t i = 0; i < y_train.size(); ++i)
                    strata[i] = std::to_string(y_train[i]);
                SplitPlan cal_plan;
                {
                    // reuse the stratified splitter over label strata
                    std::map<std::string, std::vector<std::size_t>> groups;
                    for (std::size_t i = 0; i < strata.size(); ++i)
                        groups[strata[i]].push_back(i);
                    for (auto& [token, rows] : groups) {
                        Rng rng(derive_seed(derive_seed(cfg.seed, "cal_split"), token));
                        rng.shuffle(rows);
                        const std::size_t n_cal = static_cast<std::size_t>(
                            std::floor(0.2 * static_cast<double>(rows.size()) + 0.5));
                        const std::size_t n_fit = rows.size() - n_cal;
                        for (std::size_t i = 0; i < n_fit; ++i)
                            cal_plan.train_indices.push_back(rows[i]);
                        for (std::size_t i = n_fit; i < rows.size(); ++i)
                            cal_plan.test_indices.push_back(rows[i]);
                    }
                    std::sort(cal_plan.train_indices.begin(), cal_plan.train_indices.end());
                    std::sort(cal_plan.test_indices.begin(), cal_plan.test_indices.end());
                }
                const Matrix x_fit = ftrain.x.take_rows(cal_plan.train_indices);
                const Matrix x_cal = ftrain.x.take_rows(cal_plan.test_indices);
                std::vector<int> y_fit, y_cal;
                for (auto i : cal_plan.train_indices) y_fit.push_back(y_train[i]);
                for (auto i : cal_plan.test_indices) y_cal.push_back(y_train[i]);

                ModelSpec spec = final_model.spec;
                spec.seed = derive_seed(cfg.seed, "cal_fit");
                const auto cw = class_weights(y_fit);
                std::vector<double> w(y_fit.size());
                for (std::size_t i = 0; i < y_fit.size(); ++i) w[i] = cw.at(y_fit[i]);
                auto cal_model = fit_classifier(spec, x_fit, y_fit, w);
                cal_model.feature_names = ftrain.names;

                const auto p_cal = predict_proba(cal_model, x_cal);
                const auto p_test_cal_model = predict_proba(cal_model, ftest.x);

                if (cfg.calibration) {
                    const auto iso = isotonic_calibrate(p_cal, y_cal);
                    const auto p_cal_fitted = iso.apply(p_cal);
                    const auto p_test_calibrated = iso.apply(p_test_cal_model);

                    auto brier = [](std::span<const int> yy, std::span<const double> pp) {
                        double b = 0.0;
                        for (std::size_t i = 0; i < yy.size(); ++i)
                            b += (pp[i] - yy[i]) * (pp[i] - yy[i]);
                        return b / static_cast<double>(yy.size());
                    };

                    TableData t;
                    t.name = "calibration_metrics";
                    t.title = "Brier scores before/after isotonic calibration";
                    t.header = {"dataset", "before", "after"};
                    t.rows.push_back({"calibration_split", fmt_num(brier(y_cal, p_cal)),
                                      fmt_num(brier(y_cal, p_cal_fitted))});
                    t.rows.push_back({"test", fmt_num(brier(y_test, p_test_cal_model)),
                                      fmt_num(brier(y_test, p_test_calibrated))});
                    s.tables.push_back(std::move(t));

                    TableData map;
                    map.name = "calibration_map";
                    map.title = "Isotonic calibration map";
                    map.header = {"p", "calibrated"};
                    for (std::size_t i = 0; i < iso.knots().size(); ++i)
                        map.rows.push_back({fmt_num(iso.knots()[i]), fmt_num(iso.values()[i])});
                    s.tables.push_back(std::move(map));

                    Figure fig;
                    fig.name = "fig_calibration";
                    fig.title = "Isotonic calibration map (right-continuous step)";
                    svg::Series step{"isotonic map", iso.knots(), iso.values(), "", true};
                    fig.svg = svg::line_chart("Calibration map", "predicted probability",
                                              "calibrated probability", {step}, true);
                    s.figures.push_back(std::move(fig));
                }

                if (cfg.conformal) {
                    const auto scores = conformal_scores(p_cal, y_cal);
                    const double qhat = conformal_quantile(scores, cfg.conformal_alpha);
                    std::size_t covered = 0, both = 0, empty = 0;
                    for (std::size_t i = 0; i < y_test.size(); ++i) {
                        const auto set = conformal_set(qhat, p_test_cal_model[i]);
                        if ((y_test[i] == 1 && set.has1) || (y_test[i] == 0 && set.has0))
                            ++covered;
                        if (set.size() == 2) ++both;
                        if (set.size() == 0) ++empty;
                    }
                    TableData t;
                    t.name = "conformal";
                    t.title = "Split-conformal prediction sets";
                    t.header = {"key", "value"};
                    t.rows = {
                        {"alpha", fmt_num(cfg.conformal_alpha)},
                        {"qhat", fmt_num(qhat)},
                        {"test_coverage",
                         fmt_num(static_cast<double>(covered) /
                                 std::max<std::size_t>(1, y_test.size()))},
                        {"fraction_both_labels",
                         fmt_num(static_cast<double>(both) /
                                 std::max<std::size_t>(1, y_test.size()))},
                        {"fraction_empty",
                         fmt_num(static_cast<double>(empty) /
                                 std::max<std::size_t>(1, y_test.size()))},
                    };
                    s.tables.push_back(std::move(t));
                }
                sections.push_back(std::move(s));
                return 0;
            });
        }

        // ----- decision curve analysis ---------------------------------------
        with_stage("dca", [&] {
            ReportSection s;
            s.id = "dca";
            s.title = "Decision curve analysis";
            const auto grid = linspace(cfg.dca_grid_min, cfg.dca_grid_max, cfg.dca_grid_points);
            const auto nb = net_benefit_curve(y_test, p_test, grid, cfg.dca_harm_weight);
            TableData t;
            t.name = "dca";
            t.title = "Net benefit (harm weight " + fmt_num(cfg.dca_harm_weight) + ")";
            t.header = {"threshold", "model", "treat_all", "treat_none", "random"};
            for (std::size_t i = 0; i < nb.grid.size(); ++i)
                t.rows.push_back({fmt_num(nb.grid[i]), fmt_num(nb.model[i]),
                                  fmt_num(nb.treat_all[i]), fmt_num(nb.treat_none[i]),
                                  fmt_num(nb.random_classifier[i])});
            s.tables.push_back(std::move(t));

            Figure fig;
            fig.name = "fig_dca";
            fig.title = "Decision curves on the test set";
            fig.svg = svg::line_chart(
                "Decision curve analysis", "threshold probability", "net benefit",
                {{"model", nb.grid, nb.model, "", false},
                 {"treat all", nb.grid, nb.treat_all, "", false},
                 {"treat none", nb.grid, nb.treat_none, "", false},
                 {"random", nb.grid, nb.random_classifier, "", false}});
            s.figures.push_back(std::move(fig));
            sections.push_back(std::move(s));
            return 0;
        });

        // ----- attributions ---------------------------------------------------
        ShapMatrix shap_test = with_stage("attributions", [&] {
            const Matrix background = seeded_row_sample(
                ftrain.x, static_cast<std::size_t>(cfg.background_rows),
                derive_seed(cfg.seed, "background"));
            return attributions_for(final_model, ftest.x, background, cfg.mc_orderings,
                                    derive_seed(cfg.seed, "shap"));
        });

        with_stage("attributions", [&] {
            ReportSection s;
            s.id = "attributions";
            s.title = "Feature attributions";
            s.paragraphs.push_back(
                std::string("Attribution scale: ") +
                (shap_test.scale == ShapMatrix::Scale::Margin ? "margin (log-odds)"
                                                              : "probability") +
                "; base value " + fmt_num(shap_test.base_value) + ".");

            TableData long_form;
            long_form.name = "attributions_test";
            long_form.title = "Per-row attributions (test set)";
            long_form.header = {"row", "feature", "value"};
            for (std::size_t r = 0; r < shap_test.values.rows; ++r)
                for (std::size_t f = 0; f < shap_test.values.cols; ++f)
                    long_form.rows.push_back(
                        {fmt_num(r), shap_test.feature_names[f],
                         fmt_num(shap_test.values.at(r, f))});
            s.tables.push_back(std::move(long_form));

            const auto sig = shap_significance(shap_test, cfg.significance_bootstrap,
                                               derive_seed(cfg.seed, "significance"));
            TableData sigt;
            sigt.name = "significance";
            sigt.title = "Bootstrap significance of attributions (tau = " + fmt_num(sig.tau) +
                         ", " + std::to_string(cfg.significance_bootstrap) + " resamples)";
            sigt.header = {"feature", "median_abs", "crossing_fraction", "significant"};
            for (std::size_t f = 0; f < shap_test.feature_names.size(); ++f)
                sigt.rows.push_back({shap_test.feature_names[f], fmt_num(sig.median_abs[f]),
                                     fmt_num(sig.crossing_fraction[f]),
                                     sig.significant[f] ? "yes" : "no"});
            s.tables.push_back(std::move(sigt));

            const auto perm =
                permutation_importance(final_model, ftest.x, y_test, ImportanceMetric::Auc,
                                       cfg.permutation_repeats,
                                       derive_seed(cfg.seed, "perm_importance"), final_threshold);
            TableData pt;
            pt.name = "permutation_importance";
            pt.title = "Permutation importance (AUC drop, " +
                       std::to_string(cfg.permutation_repeats) + " repeats)";
            pt.header = {"feature", "mean_drop", "sd"};
            for (std::size_t f = 0; f < ftest.names.size(); ++f)
                pt.rows.push_back(
                    {ftest.names[f], fmt_num(perm.mean_drop[f]), fmt_num(perm.sd[f])});
            s.tables.push_back(std::move(pt));

            const auto correct =
                correct_only_importance(shap_test, y_test, p_test, final_threshold);
            TableData ct;
            ct.name = "correct_only_importance";
            ct.title = "Mean |attribution| over correctly classified rows (" +
                       std::to_string(correct.correct_rows) + " rows)";
            ct.header = {"feature", "correct_only", "all_rows"};
            for (std::size_t f = 0; f < shap_test.feature_names.size(); ++f) {
                double all = 0.0;
                for (std::size_t r = 0; r < shap_test.values.rows; ++r)
                    all += std::fabs(shap_test.values.at(r, f));
                if (shap_test.values.rows) all /= static_cast<double>(shap_test.values.rows);
                ct.rows.push_back({shap_test.feature_names[f],
                                   correct.defined ? fmt_num(correct.mean_abs[f]) : "NA",
                                   fmt_num(all)});
            }
            s.tables.push_back(std::move(ct));

            // unified importance
            std::vector<std::pair<std::string, std::vector<double>>> methods;
            {
                std::vector<double> mean_abs(shap_test.values.cols, 0.0);
                for (std::size_t r = 0; r < shap_test.values.rows; ++r)
                    for (std::size_t f = 0; f < shap_test.values.cols; ++f)
                        mean_abs[f] += std::fabs(shap_test.values.at(r, f));
                for (double& v : mean_abs)
                    if (shap_test.values.rows) v /= static_cast<double>(shap_test.values.rows);
                methods.emplace_back("shap", std::move(mean_abs));
            }
            methods.emplace_back("permutation", perm.mean_drop);
            if (final_model.is_tree_model())
                methods.emplace_back("tree_gain", tree_gain_importance(final_model));
            const auto unified = unify_importance(methods, ftest.names);
            TableData ut;
            ut.name = "importance_unified";
            ut.title = "Unified feature importance (min-max normalized mean)";
            ut.header = {"feature"};
            for (const auto& m : unified.methods) ut.header.push_back(m + "_norm");
            ut.header.push_back("unified");
            ut.header.push_back("rank");
            for (std::size_t f = 0; f < unified.features.size(); ++f) {
                std::vector<std::string> row{unified.features[f]};
                for (std::size_t m = 0; m < unified.methods.size(); ++m)
                    row.push_back(fmt_num(unified.normalized.at(m, f)));
                row.push_back(fmt_num(unified.unified[f]));
                row.push_back(fmt_num(unified.rank[f]));
                ut.rows.push_back(std::move(row));
            }
            s.tables.push_back(std::move(ut));

            // grouped attribution summary figure
            const auto [display, grouped] = group_importance(shap_test.feature_names, shap_test);
            std::vector<std::size_t> order(display.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return grouped[a] > grouped[b]; });
            std::vector<std::string> top_names;
            std::vector<double> top_values;
            for (std::size_t i = 0; i < std::min<std::size_t>(20, order.size()); ++i) {
                top_names.push_back(display[order[i]]);
                top_values.push_back(grouped[order[i]]);
            }
            Figure fig;
            fig.name = "fig_shap_summary";
            fig.title = "Mean |attribution| by feature (one-hot categories grouped)";
            fig.svg = svg::bar_chart("Attribution summary (test set)", "mean |attribution|",
                                     top_names, top_values);
            s.figures.push_back(std::move(fig));
            sections.push_back(std::move(s));
            return 0;
        });

        // ----- uncertainty filter --------------------------------------------
        if (cfg.uncertainty_filter) {
            with_stage("uncertainty_filter", [&] {
                ReportSection s;
                s.id = "uncertainty";
                s.title = "Uncertainty filtering";
                const auto l1 = shap_test.row_l1();
                const auto filt = uncertainty_filter(p_test, l1, cfg.uncertainty_prob_band,
                                                     cfg.uncertainty_shap_quantile,
                                                     cfg.uncertainty_combine_and);
                TableData t;
                t.name = "uncertainty_discards";
                t.title = "Discarded test rows (" + std::to_string(filt.discarded.size()) +
                          " of " + std::to_string(p_test.size()) + ")";
                t.header = {"row", "p", "attribution_l1", "reason"};
                for (std::size_t i = 0; i < filt.discarded.size(); ++i) {
                    const std::size_t r = filt.discarded[i];
                    t.rows.push_back(
                        {fmt_num(r), fmt_num(p_test[r]), fmt_num(l1[r]), filt.reasons[i]});
                }
                s.tables.push_back(std::move(t));

                std::vector<int> yk;
                std::vector<double> pk;
                for (std::size_t r : filt.kept) {
                    yk.push_back(y_test[r]);
                    pk.push_back(p_test[r]);
                }
                if (!yk.empty()) {
                    s.tables.push_back(metric_table(
                        "uncertainty_filtered_metrics",
                        "Test metrics after discarding uncertain rows",
                        compute_metrics(yk, pk, final_threshold)));
                }
                sections.push_back(std::move(s));
                return 0;
            });
        }

        // ----- attribution clustering -----------------------------------------
        if (cfg.clustering) {
            with_stage("clustering", [&] {
                ReportSection s;
                s.id = "clusters";
                s.title = "Attribution clustering";
                const int k_max =
                    std::min<int>(cfg.cluster_k_max, static_cast<int>(shap_test.values.rows));
                if (k_max < cfg.cluster_k_min) {
                    s.paragraphs.push_back("Too few test rows for the requested k range.");
                } else {
                    const auto clusters =
                        shap_clusters(shap_test, y_test, p_test, final_threshold,
                                      cfg.cluster_k_min, k_max, derive_seed(cfg.seed, "cluster"));
                    s.paragraphs.push_back(
                        "Chosen k = " + std::to_string(clusters.chosen_k) +
                        (clusters.degenerate ? " (degenerate: identical attribution rows)" : "") +
                        ".");
                    TableData t;
                    t.name = "cluster_assignment";
                    t.title = "Cluster assignment (test rows)";
                    t.header = {"row", "cluster"};
                    for (std::size_t r = 0; r < clusters.labels.size(); ++r)
                        t.rows.push_back(
                            {fmt_num(r), fmt_num(static_cast<long long>(clusters.labels[r]))});
                    s.tables.push_back(std::move(t));

                    TableData ci;
                    ci.name = "cluster_importance";
                    ci.title = "Per-cluster mean |attribution|";
                    ci.header = {"cluster", "feature", "mean_abs"};
                    for (std::size_t c = 0; c < clusters.per_cluster_importance.rows; ++c)
                        for (std::size_t f = 0; f < clusters.per_cluster_importance.cols; ++f)
                            ci.rows.push_back({fmt_num(c), shap_test.feature_names[f],
                                               fmt_num(clusters.per_cluster_importance.at(c, f))});
                    s.tables.push_back(std::move(ci));

                    TableData cm;
                    cm.name = "cluster_metrics";
                    cm.title = "Per-cluster performance";
                    cm.header = {"cluster", "n", "auc", "mcc", "sensitivity", "specificity",
                                 "brier"};
                    for (std::size_t c = 0; c < clusters.per_cluster_metrics.size(); ++c) {
                        const auto& m = clusters.per_cluster_metrics[c];
                        cm.rows.push_back({fmt_num(c),
                                           fmt_num(m.tp + m.fp + m.tn + m.fn),
                                           fmt_flagged(m.auc, m.auc_defined), fmt_num(m.mcc),
                                           fmt_num(m.sensitivity), fmt_num(m.specificity),
                                           fmt_num(m.brier)});
                    }
                    s.tables.push_back(std::move(cm));
                }
                sections.push_back(std::move(s));
                return 0;
            });
        }

        // ----- pairwise interactions ------------------------------------------
        if (cfg.interactions) {
            with_stage("interactions", [&] {
                ReportSection s;
                s.id = "interactions";
                s.title = "Pairwise feature interactions";
                const auto pairs = pair_interactions(
                    final_model, ftest.x, y_test, ImportanceMetric::Auc, cfg.permutation_repeats,
                    derive_seed(cfg.seed, "interactions"), final_threshold);
                TableData t;
                t.name = "interactions";
                t.title = "Permutation interaction scores (joint drop minus single drops)";
                t.header = {"feature_i", "feature_j", "score"};
                for (const auto& pr : pairs)
                    t.rows.push_back(
                        {ftest.names[pr.i], ftest.names[pr.j], fmt_num(pr.score)});
                s.tables.push_back(std::move(t));
                sections.push_back(std::move(s));
                return 0;
            });
        }
    }

    // ----- survival branch ---------------------------------------------------
    if (cfg.survival) {
        with_stage("survival", [&] {
            ReportSection s;
            s.id = "survival";
            s.title = "Survival analysis";

            auto make_survival = [&](const Table& t) {
                SurvivalData d;
                auto fv = feature_view(t);
                d.features = std::move(fv.x);
                d.feature_names = std::move(fv.names);
                const Column& tc = t.column(cfg.time_column);
                const Column& ec = t.column(cfg.event_column);
                for (std::size_t r = 0; r < t.row_count(); ++r) {
                    d.time.push_back(tc.num[r]);
                    d.event.push_back(static_cast<int>(ec.num[r]));
                }
                return d;
            };
            const SurvivalData d_train = make_survival(train);
            const SurvivalData d_test = make_survival(test);

            const auto rsf = fit_rsf(d_train, cfg.rsf_trees, cfg.rsf_min_leaf,
                                     derive_seed(cfg.seed, "rsf"));
            const auto cox = fit_cox_en(d_train, cfg.cox_lambda, cfg.cox_l1_ratio);

            const auto grid = event_time_grid(d_train.time, d_train.event, cfg.horizon);
            if (grid.empty()) throw DataError("no training events within the horizon");

            const auto rsf_test_chf = predict_chf(rsf, d_test.features, grid);
            const auto cox_test_chf = predict_chf(cox, d_test.features, grid);

            std::vector<double> rsf_risk(d_test.features.rows), cox_risk;
            for (std::size_t r = 0; r < rsf_test_chf.size(); ++r)
                rsf_risk[r] = rsf_test_chf[r].chf.back();
            cox_risk = cox.risk_scores(d_test.features);

            bool truncated = false;
            const double rsf_ibs = integrated_brier(chf_to_survival(rsf_test_chf), d_test.time,
                                                    d_test.event, grid, &truncated);
            const double cox_ibs = integrated_brier(chf_to_survival(cox_test_chf), d_test.time,
                                                    d_test.event, grid, nullptr);

            TableData mt;
            mt.name = "survival_metrics";
            mt.title = "Survival model comparison (test set)";
            mt.header = {"model", "concordance_index", "integrated_brier", "auc_at_horizon"};
            const double rsf_ci = concordance_index(rsf_risk, d_test.time, d_test.event);
            const double cox_ci = concordance_index(cox_risk, d_test.time, d_test.event);
            // evaluate just inside the horizon so rows administratively
            // censored at exactly the horizon count as controls
            const double t_eval =
                std::nextafter(cfg.horizon, 0.0);
            const double rsf_auc =
                cumulative_dynamic_auc(rsf_risk, d_test.time, d_test.event, t_eval);
            const double cox_auc =
                cumulative_dynamic_auc(cox_risk, d_test.time, d_test.event, t_eval);
            mt.rows.push_back(
                {"rsf", fmt_num(rsf_ci), fmt_num(rsf_ibs), fmt_num(rsf_auc)});
            mt.rows.push_back(
                {"cox_en", fmt_num(cox_ci), fmt_num(cox_ibs), fmt_num(cox_auc)});
            s.tables.push_back(std::move(mt));
            if (truncated)
                s.paragraphs.push_back(
                    "Warning: IBS grid truncated to the last observed test time.");

            TableData coxt;
            coxt.name = "cox_coefficients";
            coxt.title = "Cox elastic-net coefficients (standardized scale)";
            coxt.header = {"feature", "beta"};
            for (std::size_t f = 0; f < cox.feature_names.size(); ++f)
                coxt.rows.push_back({cox.feature_names[f], fmt_num(cox.beta[f])});
            s.tables.push_back(std::move(coxt));

            // time-updated AUC at grid quartiles
            TableData ta;
            ta.name = "survival_auc_over_time";
            ta.title = "Time-updated AUC (RSF risk)";
            ta.header = {"time", "auc"};
            for (double q : {0.25, 0.5, 0.75, 1.0}) {
                const double t_eval = quantile(grid, q);
                ta.rows.push_back(
                    {fmt_num(t_eval),
                     fmt_num(cumulative_dynamic_auc(rsf_risk, d_test.time, d_test.event,
                                                    t_eval))});
            }
            s.tables.push_back(std::move(ta));

            // hazard-to-binary translation
            const auto rsf_train_chf = predict_chf(rsf, d_train.features, grid);
            const auto translation = chf_to_binary(rsf_train_chf, d_train.time, d_train.event,
                                                   rsf_test_chf, cfg.horizon);
            TableData tt;
            tt.name = "survival_translation";
            tt.title = "Cumulative-hazard-to-binary translation (test set)";
            tt.header = {"row", "distance_event", "distance_event_free", "predicted", "actual"};
            std::size_t tp = 0, fp = 0, tn = 0, fn = 0, excluded = 0;
            for (std::size_t r = 0; r < d_test.time.size(); ++r) {
                std::string actual = "excluded";
                if (d_test.event[r] == 1 && d_test.time[r] <= cfg.horizon) actual = "1";
                else if (d_test.time[r] >= cfg.horizon) actual = "0";
                else ++excluded;
                if (actual == "1") (translation.predicted[r] == 1 ? tp : fn) += 1;
                if (actual == "0") (translation.predicted[r] == 1 ? fp : tn) += 1;
                tt.rows.push_back({fmt_num(r), fmt_num(translation.distance_event[r]),
                                   fmt_num(translation.distance_event_free[r]),
                                   fmt_num(static_cast<long long>(translation.predicted[r])),
                                   actual});
            }
            s.tables.push_back(std::move(tt));

            TableData tc;
            tc.name = "survival_translation_confusion";
            tc.title = "Translated confusion matrix (censored-before-horizon rows excluded)";
            tc.header = {"key", "value"};
            const std::size_t denom = tp + fp + tn + fn;
            tc.rows = {{"tp", fmt_num(tp)},
                       {"fp", fmt_num(fp)},
                       {"tn", fmt_num(tn)},
                       {"fn", fmt_num(fn)},
                       {"excluded", fmt_num(excluded)},
                       {"accuracy",
                        fmt_num(denom ? static_cast<double>(tp + tn) / denom : 0.0)}};
            s.tables.push_back(std::move(tc));

            Figure cmfig;
            cmfig.name = "fig_survival_confusion";
            cmfig.title = "Translated confusion matrix";
            cmfig.svg = svg::confusion_matrix("Hazard-to-binary translation", tp, fp, tn, fn);
            s.figures.push_back(std::move(cmfig));

            // CHF curves: class medians plus a few test curves
            {
                Figure fig;
                fig.name = "fig_chf";
                fig.title = "Median cumulative hazard per class with sample test curves";
                std::vector<svg::Series> series;
                series.push_back({"event median", translation.medians.grid,
                                  translation.medians.event_median, "#d62728", true});
                series.push_back({"event-free median", translation.medians.grid,
                                  translation.medians.event_free_median, "#1f77b4", true});
                for (std::size_t r = 0; r < std::min<std::size_t>(5, rsf_test_chf.size()); ++r) {
                    std::vector<double> vals;
                    for (double g : translation.medians.grid)
                        vals.push_back(rsf_test_chf[r].at(g));
                    series.push_back({"test row " + std::to_string(r),
                                      translation.medians.grid, vals, "#bbbbbb", true});
                }
                fig.svg = svg::line_chart("Cumulative hazard", "time", "cumulative hazard",
                                          series);
                s.figures.push_back(std::move(fig));
            }

            TableData curves;
            curves.name = "survival_chf_test";
            curves.title = "Test-set cumulative hazard curves (long form)";
            curves.header = {"row", "time", "chf"};
            for (std::size_t r = 0; r < rsf_test_chf.size(); ++r)
                for (std::size_t g = 0; g < grid.size(); ++g)
                    curves.rows.push_back(
                        {fmt_num(r), fmt_num(grid[g]), fmt_num(rsf_test_chf[r].chf[g])});
            s.tables.push_back(std::move(curves));

            // attributions on a capped subset
            const std::size_t attr_rows = std::min<std::size_t>(d_test.features.rows, 25);
            std::vector<std::size_t> head(attr_rows);
            std::iota(head.begin(), head.end(), std::size_t{0});
            const Matrix x_attr = d_test.features.take_rows(head);
            std::vector<double> t_attr(attr_rows);
            std::vector<int> e_attr(attr_rows);
            for (std::size_t i = 0; i < attr_rows; ++i) {
                t_attr[i] = d_test.time[i];
                e_attr[i] = d_test.event[i];
            }
            const Matrix bg = seeded_row_sample(d_train.features, 50,
                                                derive_seed(cfg.seed, "surv_bg"));
            if (bg.rows >= 10 && attr_rows >= 2) {
                const auto attr = survival_attributions(
                    rsf, x_attr, t_attr, e_attr, bg, grid, cfg.survshap_permutations,
                    cfg.permutation_repeats, derive_seed(cfg.seed, "survshap"));
                TableData at;
                at.name = "survival_importance";
                at.title = "Survival feature importance (functional Shapley + CI permutation)";
                at.header = {"feature", "shap_scalar", "perm_ci_drop", "perm_sd"};
                for (std::size_t f = 0; f < d_train.feature_names.size(); ++f)
                    at.rows.push_back({d_train.feature_names[f],
                                       fmt_num(attr.scalar_importance[f]),
                                       fmt_num(attr.permutation_importance[f]),
                                       fmt_num(attr.permutation_sd[f])});
                s.tables.push_back(std::move(at));
            }
            sections.push_back(std::move(s));
            return 0;
        });
    }

    // ----- regression branch --------------------------------------------------
    if (cfg.regression) {
        with_stage("regression", [&] {
            ReportSection s;
            s.id = "regression";
            s.title = "Regression analysis";
            const auto ftrain = feature_view(train);
            const auto ftest = feature_view(test);
            std::vector<double> y_tr, y_te;
            {
                const Column& c = train.column(cfg.continuous_outcome);
                for (std::size_t r = 0; r < train.row_count(); ++r) y_tr.push_back(c.num[r]);
                const Column& ct = test.column(cfg.continuous_outcome);
                for (std::size_t r = 0; r < test.row_count(); ++r) y_te.push_back(ct.num[r]);
            }
            auto lin_spec = default_spec(Algorithm::LinearReg, derive_seed(cfg.seed, "linreg"));
            auto rf_spec = default_spec(Algorithm::RfReg, derive_seed(cfg.seed, "rfreg"));
            auto lin = fit_regressor(lin_spec, ftrain.x, y_tr);
            lin.feature_names = ftrain.names;
            auto rf = fit_regressor(rf_spec, ftrain.x, y_tr);
            rf.feature_names = ftrain.names;

            const auto p_lin = predict_value(lin, ftest.x);
            const auto p_rf = predict_value(rf, ftest.x);

            TableData t;
            t.name = "regression_metrics";
            t.title = "Regression metrics (test set)";
            t.header = {"model", "rmse", "mae", "r2"};
            t.rows.push_back({"linear_reg", fmt_num(rmse(y_te, p_lin)), fmt_num(mae(y_te, p_lin)),
                              fmt_num(r_squared(y_te, p_lin))});
            t.rows.push_back({"rf_reg", fmt_num(rmse(y_te, p_rf)), fmt_num(mae(y_te, p_rf)),
                              fmt_num(r_squared(y_te, p_rf))});
            s.tables.push_back(std::move(t));

            TableData preds;
            preds.name = "regression_predictions";
            preds.title = "Test-set regression predictions";
            preds.header = {"row", "y", "linear_reg", "rf_reg"};
            for (std::size_t r = 0; r < y_te.size(); ++r)
                preds.rows.push_back(
                    {fmt_num(r), fmt_num(y_te[r]), fmt_num(p_lin[r]), fmt_num(p_rf[r])});
            s.tables.push_back(std::move(preds));

            // the forest is prioritized for explanation
            const auto shap = tree_shap(rf, ftest.x);
            std::vector<double> mean_abs(shap.values.cols, 0.0);
            for (std::size_t r = 0; r < shap.values.rows; ++r)
                for (std::size_t f = 0; f < shap.values.cols; ++f)
                    mean_abs[f] += std::fabs(shap.values.at(r, f));
            for (double& v : mean_abs)
                if (shap.values.rows) v /= static_cast<double>(shap.values.rows);
            TableData st;
            st.name = "regression_attributions";
            st.title = "Mean |attribution| for the forest regressor";
            st.header = {"feature", "mean_abs"};
            for (std::size_t f = 0; f < ftest.names.size(); ++f)
                st.rows.push_back({ftest.names[f], fmt_num(mean_abs[f])});
            s.tables.push_back(std::move(st));

            out.bundle.models.push_back({"regression_rf", serialize_model(rf)});
            out.bundle.models.push_back({"regression_linear", serialize_model(lin)});
            sections.push_back(std::move(s));
            return 0;
        });
    }

    // ----- leakage audit -------------------------------------------------------
    {
        ReportSection s;
        s.id = "audit";
        s.title = "Leakage audit";
        TableData t;
        t.name = "fit_provenance";
        t.title = "FitState provenance (every transform must be train-fit)";
        t.header = {"transform", "fit_split", "fit_row_count"};
        out.leakage_ok = true;
        for (const auto& p : out.fit_log) {
            t.rows.push_back({p.transform, p.fit_split, fmt_num(p.fit_row_count)});
            if (p.fit_split != "train") out.leakage_ok = false;
        }
        s.paragraphs.push_back(out.leakage_ok
                                   ? "All fitted transforms were fit on the training split."
                                   : "LEAKAGE: a transform was fit outside the training split.");
        s.tables.push_back(std::move(t));
        sections.push_back(std::move(s));
    }
    if (!out.leakage_ok) throw DataError("leakage audit failed: transform fit outside train");

    return out;
}

RunResult run_and_render(const PipelineConfig& cfg) {
    RunResult res;
    res.outcome = run_pipeline(cfg);
    res.files = render_report(res.outcome.bundle, cfg.out_dir);
    return res;
}

} // namespace mait
