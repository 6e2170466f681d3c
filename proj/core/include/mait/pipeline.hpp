#pragma once

#include <string>
#include <vector>

#include "mait/config.hpp"
#include "mait/preprocess.hpp"
#include "mait/report.hpp"
#include "mait/table.hpp"

namespace mait {

// Column roles for a data file: every header column gets a kind from the
// config, defaulting to continuous. Referenced columns must exist.
std::vector<ColumnSpec> config_column_specs(const PipelineConfig& cfg, const std::string& path);

// Everything a finished run hands to the renderer plus the raw audit trail.
struct PipelineOutcome {
    ReportBundle bundle;
    std::vector<FitProvenance> fit_log; // leakage audit input
    bool leakage_ok = true;
};

// Executes the configured run end to end and assembles the report bundle in
// memory; nothing touches the filesystem until render_report.
PipelineOutcome run_pipeline(const PipelineConfig& cfg);

struct RunResult {
    PipelineOutcome outcome;
    RenderResult files;
};

RunResult run_and_render(const PipelineConfig& cfg);

} // namespace mait
