#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mait/rng.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    const auto p = fs::temp_directory_path() / "mait_cli_tests";
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MAIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string write_data(const std::string& name, std::size_t n, std::uint64_t seed) {
    mait::Rng rng(seed);
    const auto path = (scratch() / name).string();
    std::ofstream f(path);
    f << "m1,m2,outcome\n";
    for (std::size_t r = 0; r < n; ++r) {
        const int y = static_cast<int>(r % 2);
        f << (y ? 1.5 : -1.5) + rng.normal() << ',' << rng.normal() << ',' << y << "\n";
    }
    return path;
}

std::string write_config(const std::string& name, const std::string& data,
                         const std::string& out) {
    const auto path = (scratch() / name).string();
    std::ofstream f(path);
    f << "[data]\ndevelopment = \"" << data << "\"\n";
    f << "[columns]\noutcome = \"outcome\"\n";
    f << "[cv]\nk_folds = 2\nn_search_iter = 2\ninner_folds = 2\n";
    f << "[models]\ncandidates = [\"gnb\"]\n";
    f << "[quality]\nbootstrap = 20\nisolation_trees = 20\n";
    f << "[explain]\nsignificance_bootstrap = 20\npermutation_repeats = 2\nmc_orderings = 8\n";
    f << "[run]\nseed = 2\nout_dir = \"" << out << "\"\n";
    return path;
}

} // namespace

TEST_CASE("run subcommand exits 0 and writes the report tree") {
    const auto data = write_data("ok.csv", 80, 5);
    const auto out = (scratch() / "cli_out").string();
    fs::remove_all(out);
    const auto cfg = write_config("ok.toml", data, out);
    CHECK(run_cli("run --config " + cfg) == 0);
    CHECK(fs::exists(fs::path(out) / "report.html"));
    CHECK(fs::exists(fs::path(out) / "tables"));
    CHECK(fs::exists(fs::path(out) / "figures"));
    CHECK(fs::exists(fs::path(out) / "models"));
}

TEST_CASE("validate subcommand dry-runs without writing outputs") {
    const auto data = write_data("val.csv", 40, 7);
    const auto out = (scratch() / "val_out").string();
    fs::remove_all(out);
    const auto cfg = write_config("val.toml", data, out);
    CHECK(run_cli("validate --config " + cfg) == 0);
    CHECK(!fs::exists(fs::path(out) / "report.html"));
}

TEST_CASE("config errors exit 2") {
    const auto bad = (scratch() / "bad.toml").string();
    {
        std::ofstream f(bad);
        f << "[data]\ndevelopment = \"x.csv\"\n[columns]\noutcome = \"y\"\nfoo = \"bar\"\n";
        f << "unknown_section_key = 1\n";
    }
    CHECK(run_cli("validate --config " + bad) == 2);
    CHECK(run_cli("run --config /nonexistent/config.toml") == 2);
}

TEST_CASE("data errors exit 3") {
    const auto out = (scratch() / "data_out").string();
    const auto cfg = write_config("missing_data.toml", "/nonexistent/data.csv", out);
    CHECK(run_cli("validate --config " + cfg) == 3);
    CHECK(run_cli("run --config " + cfg) == 3);
}

TEST_CASE("--out and --seed overrides take effect") {
    const auto data = write_data("ovr.csv", 80, 9);
    const auto out_a = (scratch() / "ovr_a").string();
    const auto out_b = (scratch() / "ovr_b").string();
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    const auto cfg = write_config("ovr.toml", data, out_a);
    CHECK(run_cli("run --config " + cfg + " --out " + out_b + " --seed 99") == 0);
    CHECK(!fs::exists(fs::path(out_a) / "report.html"));
    CHECK(fs::exists(fs::path(out_b) / "report.html"));
}

TEST_CASE("unsupported mode override is a config error") {
    const auto data = write_data("mode.csv", 40, 11);
    const auto cfg = write_config("mode.toml", data, (scratch() / "mode_out").string());
    CHECK(run_cli("run --config " + cfg + " --mode survival") == 2); // no time/event columns
}
