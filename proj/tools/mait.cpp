#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mait/config.hpp"
#include "mait/error.hpp"
#include "mait/pipeline.hpp"
#include "mait/table.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct CliOptions {
    std::string config_path;
    long long seed = -1;
    std::string out_dir;
    int threads = 0;
    std::string mode;
};

void apply_overrides(mait::PipelineConfig& cfg, const CliOptions& opts) {
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.threads > 0) {
        cfg.threads = opts.threads;
    } else if (const char* env = std::getenv("MAIT_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) cfg.threads = t;
    }
    if (!opts.mode.empty()) {
        if (opts.mode == "classify") {
            cfg.classify = true;
            cfg.survival = false;
            cfg.regression = false;
        } else if (opts.mode == "survival") {
            cfg.classify = false;
            cfg.survival = true;
            cfg.regression = false;
        } else if (opts.mode == "regression") {
            cfg.classify = false;
            cfg.survival = false;
            cfg.regression = true;
        } else if (opts.mode == "all") {
            cfg.classify = true;
            cfg.survival = true;
            cfg.regression = true;
        } else {
            throw mait::ConfigError("unknown --mode: " + opts.mode);
        }
        if (cfg.classify && cfg.outcome.empty())
            throw mait::ConfigError("classify mode requires columns.outcome");
        if (cfg.survival) {
            if (cfg.time_column.empty() || cfg.event_column.empty())
                throw mait::ConfigError("survival mode requires columns.time and columns.event");
            if (!(cfg.horizon > 0.0))
                throw mait::ConfigError("survival mode: horizon required");
        }
        if (cfg.regression && cfg.continuous_outcome.empty())
            throw mait::ConfigError("regression mode requires columns.continuous_outcome");
    }
}

int run_command(const CliOptions& opts) {
    auto cfg = mait::parse_config(opts.config_path);
    apply_overrides(cfg, opts);
    const auto result = mait::run_and_render(cfg);
    std::cout << "report: " << result.files.html_path << "\n";
    std::cout << "tables: " << result.files.csv_files.size()
              << ", figures: " << result.files.svg_files.size()
              << ", models: " << result.files.model_files.size() << "\n";
    std::cout << "leakage audit: " << (result.outcome.leakage_ok ? "pass" : "FAIL") << "\n";
    return kExitOk;
}

int validate_one(const mait::PipelineConfig& cfg, const std::string& path) {
    const auto specs = mait::config_column_specs(cfg, path);
    const auto table = mait::load_table(path, specs);
    const auto violations = mait::validate_table(table);
    std::cout << "data ok: " << path << " (" << table.row_count() << " rows, "
              << table.column_count() << " columns)\n";
    if (violations.empty()) {
        std::cout << "invariants: pass\n";
        return kExitOk;
    }
    for (const auto& v : violations)
        std::cout << "violation: " << v.code << " column=" << v.column
                  << (v.row >= 0 ? " row=" + std::to_string(v.row) : "") << "\n";
    return kExitData;
}

int validate_command(const CliOptions& opts) {
    auto cfg = mait::parse_config(opts.config_path);
    apply_overrides(cfg, opts);
    std::cout << "config ok: " << opts.config_path << " (hash " << cfg.config_hash << ")\n";
    int rc = validate_one(cfg, cfg.development_path);
    if (rc == kExitOk && !cfg.external_test_path.empty())
        rc = validate_one(cfg, cfg.external_test_path);
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MAIT: explainable machine-learning pipeline for tabular medical data"};
    app.require_subcommand(1);

    CliOptions opts;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "TOML configuration file")->required();
        cmd->add_option("--seed", opts.seed, "override run.seed");
        cmd->add_option("--out", opts.out_dir, "override run.out_dir");
        cmd->add_option("--threads", opts.threads, "override run.threads (or MAIT_THREADS)");
        cmd->add_option("--mode", opts.mode, "classify|survival|regression|all");
    };
    auto* run = app.add_subcommand("run", "execute the pipeline and write the report");
    add_common(run);
    auto* validate = app.add_subcommand("validate", "dry-run config and data checks");
    add_common(validate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run)) return run_command(opts);
        return validate_command(opts);
    } catch (const mait::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mait::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
