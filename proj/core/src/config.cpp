#include "mait/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mait/error.hpp"
#include "mait/model.hpp"

namespace mait {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

// strips a # comment that is not inside a string
std::string strip_comment(const std::string& line) {
    bool in_basic = false, in_literal = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_basic) {
            if (c == '\\') ++i;
            else if (c == '"') in_basic = false;
        } else if (in_literal) {
            if (c == '\'') in_literal = false;
        } else if (c == '"') {
            in_basic = true;
        } else if (c == '\'') {
            in_literal = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

class ValueParser {
public:
    explicit ValueParser(std::string_view text) : s_(text) {}

    TomlValue parse() {
        skip_ws();
        TomlValue v = parse_value();
        skip_ws();
        if (pos_ != s_.size())
            throw ConfigError("config: trailing characters after value: \"" +
                              std::string(s_.substr(pos_)) + "\"");
        return v;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() &&
               (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r'))
            ++pos_;
    }

    TomlValue parse_value() {
        if (pos_ >= s_.size()) throw ConfigError("config: missing value");
        const char c = s_[pos_];
        if (c == '"') return parse_basic_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') return parse_array();
        return parse_scalar();
    }

    TomlValue parse_basic_string() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_];
            if (c == '\\' && pos_ + 1 < s_.size()) {
                ++pos_;
                switch (s_[pos_]) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case 'r': c = '\r'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default:
                        throw ConfigError("config: unsupported escape in string");
                }
            }
            out.push_back(c);
            ++pos_;
        }
        if (pos_ >= s_.size()) throw ConfigError("config: unterminated string");
        ++pos_;
        TomlValue v;
        v.kind = TomlValue::Kind::String;
        v.str = std::move(out);
        return v;
    }

    TomlValue parse_literal_string() {
        ++pos_;
        const std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != '\'') ++pos_;
        if (pos_ >= s_.size()) throw ConfigError("config: unterminated literal string");
        TomlValue v;
        v.kind = TomlValue::Kind::String;
        v.str = std::string(s_.substr(start, pos_ - start));
        ++pos_;
        return v;
    }

    TomlValue parse_array() {
        ++pos_;
        TomlValue v;
        v.kind = TomlValue::Kind::Array;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return v;
        }
        for (;;) {
            skip_ws();
            v.array.push_back(parse_value());
            skip_ws();
            if (pos_ >= s_.size()) throw ConfigError("config: unterminated array");
            if (s_[pos_] == ',') {
                ++pos_;
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ']') { // trailing comma
                    ++pos_;
                    return v;
                }
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                return v;
            }
            throw ConfigError("config: expected ',' or ']' in array");
        }
    }

    TomlValue parse_scalar() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' &&
               s_[pos_] != '\t' && s_[pos_] != '\n' && s_[pos_] != '\r')
            ++pos_;
        const std::string tok = std::string(s_.substr(start, pos_ - start));
        TomlValue v;
        if (tok == "true" || tok == "false") {
            v.kind = TomlValue::Kind::Boolean;
            v.boolean = tok == "true";
            return v;
        }
        double num = 0.0;
        std::string cleaned = tok;
        cleaned.erase(std::remove(cleaned.begin(), cleaned.end(), '_'), cleaned.end());
        auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), num);
        if (ec == std::errc{} && ptr == cleaned.data() + cleaned.size()) {
            v.kind = TomlValue::Kind::Number;
            v.num = num;
            return v;
        }
        throw ConfigError("config: cannot parse value \"" + tok + "\"");
    }
};

} // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> out;
    std::string section;
    std::istringstream ss(text);
    std::string raw;
    std::string pending; // accumulates multi-line array values
    std::string pending_key;

    auto finish_pending = [&] {
        if (pending_key.empty()) return;
        out[pending_key] = ValueParser(pending).parse();
        pending_key.clear();
        pending.clear();
    };
    auto balanced = [](const std::string& s) {
        int depth = 0;
        bool in_b = false, in_l = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const char c = s[i];
            if (in_b) {
                if (c == '\\') ++i;
                else if (c == '"') in_b = false;
            } else if (in_l) {
                if (c == '\'') in_l = false;
            } else if (c == '"') in_b = true;
            else if (c == '\'') in_l = true;
            else if (c == '[') ++depth;
            else if (c == ']') --depth;
        }
        return depth <= 0;
    };

    while (std::getline(ss, raw)) {
        std::string line = trim(strip_comment(raw));
        if (!pending_key.empty()) {
            pending += "\n" + line;
            if (balanced(pending)) finish_pending();
            continue;
        }
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: malformed section header: " + line);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError("config: empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value, got: " + line);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config: empty key");
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) throw ConfigError("config: duplicate key \"" + full + "\"");
        if (!balanced(value)) {
            pending_key = full;
            pending = value;
            continue;
        }
        out[full] = ValueParser(value).parse();
    }
    finish_pending();
    return out;
}

std::map<std::string, TomlValue> parse_toml_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_toml(ss.str());
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xF];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

namespace {

class ConfigReader {
public:
    explicit ConfigReader(std::map<std::string, TomlValue> values)
        : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        touch(key);
        const auto& v = values_.at(key);
        if (v.kind != TomlValue::Kind::String)
            throw ConfigError("config: key \"" + key + "\" must be a string");
        return v.str;
    }

    double get_number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        touch(key);
        const auto& v = values_.at(key);
        if (v.kind != TomlValue::Kind::Number)
            throw ConfigError("config: key \"" + key + "\" must be a number");
        return v.num;
    }

    bool get_bool(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        touch(key);
        const auto& v = values_.at(key);
        if (v.kind != TomlValue::Kind::Boolean)
            throw ConfigError("config: key \"" + key + "\" must be a boolean");
        return v.boolean;
    }

    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback) {
        if (!has(key)) return fallback;
        touch(key);
        const auto& v = values_.at(key);
        if (v.kind != TomlValue::Kind::Array)
            throw ConfigError("config: key \"" + key + "\" must be an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v.array) {
            if (e.kind != TomlValue::Kind::String)
                throw ConfigError("config: key \"" + key + "\" must contain only strings");
            out.push_back(e.str);
        }
        return out;
    }

    void check_all_consumed() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : values_)
            if (!consumed_.count(k)) unknown.push_back(k);
        if (!unknown.empty()) {
            std::string msg = "config: unknown keys:";
            for (const auto& k : unknown) msg += " \"" + k + "\"";
            throw ConfigError(msg);
        }
    }

private:
    void touch(const std::string& key) { consumed_.insert(key); }

    std::map<std::string, TomlValue> values_;
    std::set<std::string> consumed_;
};

PipelineConfig build_config(std::map<std::string, TomlValue> kv, const std::string& raw_text) {
    ConfigReader r(std::move(kv));
    PipelineConfig c;

    c.development_path = r.get_string("data.development", "");
    if (c.development_path.empty())
        throw ConfigError("config: missing required key \"data.development\"");
    c.external_test_path = r.get_string("data.external_test", "");

    c.outcome = r.get_string("columns.outcome", "");
    c.continuous_outcome = r.get_string("columns.continuous_outcome", "");
    c.time_column = r.get_string("columns.time", "");
    c.event_column = r.get_string("columns.event", "");
    c.categorical = r.get_string_list("columns.categorical", {});
    c.identifier = r.get_string_list("columns.identifier", {});

    c.classify = r.get_bool("modes.classify", true);
    c.survival = r.get_bool("modes.survival", false);
    c.regression = r.get_bool("modes.regression", false);

    c.test_fraction = r.get_number("split.test_fraction", 0.3);
    c.stratify_columns = r.get_string_list("split.stratify", {});
    c.stratify_quantile_bins = static_cast<int>(r.get_number("split.quantile_bins", 4));

    c.k_folds = static_cast<int>(r.get_number("cv.k_folds", 5));
    c.n_search_iter = static_cast<int>(r.get_number("cv.n_search_iter", 25));
    c.inner_folds = static_cast<int>(r.get_number("cv.inner_folds", 3));
    c.tuning = r.get_bool("cv.tuning", true);
    c.objective = r.get_string("cv.objective", "auc");
    if (c.objective != "auc" && c.objective != "pr_auc")
        throw ConfigError("config: cv.objective must be \"auc\" or \"pr_auc\"");

    c.candidates =
        r.get_string_list("models.candidates", {"logreg_l1", "gnb", "random_forest", "hgbt"});
    for (const auto& name : c.candidates) {
        auto a = algorithm_from_string(name);
        if (!a || !algorithm_is_classifier(*a))
            throw ConfigError("config: unknown classification candidate \"" + name + "\"");
    }

    c.feature_selection = r.get_bool("options.feature_selection", false);
    c.feature_k = static_cast<int>(r.get_number("options.feature_k", 10));
    c.scaling = r.get_bool("options.scaling", true);
    c.calibration = r.get_bool("options.calibration", false);
    c.conformal = r.get_bool("options.conformal", false);
    c.conformal_alpha = r.get_number("options.conformal_alpha", 0.1);
    c.threshold_tuning = r.get_bool("options.threshold_tuning", true);
    c.oversampling = r.get_bool("options.oversampling", false);
    c.label_propagation = r.get_bool("options.label_propagation", false);
    c.uncertainty_filter = r.get_bool("options.uncertainty_filter", false);
    c.clustering = r.get_bool("options.clustering", false);
    c.cluster_k_min = static_cast<int>(r.get_number("options.cluster_k_min", 2));
    c.cluster_k_max = static_cast<int>(r.get_number("options.cluster_k_max", 8));
    c.interactions = r.get_bool("options.interactions", false);

    c.variance_eps = r.get_number("quality.variance_eps", 1e-12);
    c.rare_min_fraction = r.get_number("quality.rare_min_fraction", 0.05);
    c.quality_bootstrap = static_cast<int>(r.get_number("quality.bootstrap", 500));
    c.confidence = r.get_number("quality.confidence", 0.95);
    c.isolation_trees = static_cast<int>(r.get_number("quality.isolation_trees", 200));
    c.isolation_subsample = static_cast<int>(r.get_number("quality.isolation_subsample", 256));

    c.knn_k = static_cast<int>(r.get_number("preprocess.knn_k", 5));
    c.label_prop_sigma = r.get_number("preprocess.label_prop_sigma", 0.0);

    c.uncertainty_prob_band = r.get_number("uncertainty.prob_band", 0.1);
    c.uncertainty_shap_quantile = r.get_number("uncertainty.shap_quantile", 0.1);
    const std::string combine = r.get_string("uncertainty.combine", "and");
    if (combine != "and" && combine != "or")
        throw ConfigError("config: uncertainty.combine must be \"and\" or \"or\"");
    c.uncertainty_combine_and = combine == "and";

    c.dca_harm_weight = r.get_number("dca.harm_weight", 1.0);
    c.dca_grid_min = r.get_number("dca.grid_min", 0.01);
    c.dca_grid_max = r.get_number("dca.grid_max", 0.99);
    c.dca_grid_points = static_cast<int>(r.get_number("dca.grid_points", 99));

    c.background_rows = static_cast<int>(r.get_number("explain.background_rows", 100));
    c.mc_orderings = static_cast<int>(r.get_number("explain.mc_orderings", 50));
    c.significance_bootstrap =
        static_cast<int>(r.get_number("explain.significance_bootstrap", 200));
    c.permutation_repeats = static_cast<int>(r.get_number("explain.permutation_repeats", 10));

    c.horizon = r.get_number("survival.horizon", 0.0);
    c.rsf_trees = static_cast<int>(r.get_number("survival.rsf_trees", 100));
    c.rsf_min_leaf = static_cast<int>(r.get_number("survival.rsf_min_leaf", 10));
    c.cox_lambda = r.get_number("survival.cox_lambda", 0.01);
    c.cox_l1_ratio = r.get_number("survival.cox_l1_ratio", 0.5);
    c.survshap_permutations =
        static_cast<int>(r.get_number("survival.survshap_permutations", 30));

    c.seed = static_cast<std::uint64_t>(r.get_number("run.seed", 1));
    c.threads = static_cast<int>(r.get_number("run.threads", 1));
    c.out_dir = r.get_string("run.out_dir", "out");

    r.check_all_consumed();

    // cross-field invariants
    if (!c.classify && !c.survival && !c.regression)
        throw ConfigError("config: at least one mode must be enabled");
    if (c.classify && c.outcome.empty())
        throw ConfigError("config: classify mode requires columns.outcome");
    if (c.survival) {
        if (c.time_column.empty() || c.event_column.empty())
            throw ConfigError("config: survival mode requires columns.time and columns.event");
        if (!(c.horizon > 0.0))
            throw ConfigError("config: survival mode: horizon required (survival.horizon > 0)");
    }
    if (c.regression && c.continuous_outcome.empty())
        throw ConfigError("config: regression mode requires columns.continuous_outcome");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
        throw ConfigError("config: split.test_fraction must be in (0,1)");
    if (!(c.conformal_alpha > 0.0 && c.conformal_alpha < 1.0))
        throw ConfigError("config: options.conformal_alpha must be in (0,1)");
    if (c.k_folds < 2) throw ConfigError("config: cv.k_folds must be >= 2");
    if (c.n_search_iter < 1) throw ConfigError("config: cv.n_search_iter must be >= 1");

    if (c.stratify_columns.empty()) {
        if (c.classify) c.stratify_columns = {c.outcome};
        else if (c.survival) c.stratify_columns = {c.event_column};
        else c.stratify_columns = {c.continuous_outcome};
    }

    c.config_hash = fnv1a_hex(raw_text);
    return c;
}

} // namespace

PipelineConfig parse_config_text(const std::string& text) {
    return build_config(parse_toml(text), text);
}

PipelineConfig parse_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    return build_config(parse_toml(text), text);
}

} // namespace mait
