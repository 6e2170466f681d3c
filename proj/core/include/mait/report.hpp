#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mait/matrix.hpp"

namespace mait {

struct TableData {
    std::string name; // CSV file stem
    std::string title;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct Figure {
    std::string name; // SVG file stem
    std::string title;
    std::string svg;
};

struct ReportSection {
    std::string id;
    std::string title;
    std::vector<std::string> paragraphs;
    std::vector<TableData> tables;
    std::vector<Figure> figures;
};

struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string format_version = "mait-report-1";
};

struct ModelArtifact {
    std::string name; // file stem under models/
    std::string content;
};

struct ReportBundle {
    std::vector<ReportSection> sections;
    Provenance provenance;
    std::vector<ModelArtifact> models;
};

struct RenderResult {
    std::string html_path;
    std::vector<std::string> csv_files;
    std::vector<std::string> svg_files;
    std::vector<std::string> model_files;
};

// One self-contained HTML plus tables/*.csv, figures/*.svg and
// models/*.model. Files already written are removed if rendering fails.
RenderResult render_report(const ReportBundle& bundle, const std::string& out_dir);

namespace svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
    bool step = false;
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       bool diagonal = false);

std::string bar_chart(const std::string& title, const std::string& value_label,
                      const std::vector<std::string>& labels, const std::vector<double>& values);

std::string heatmap(const std::string& title, const std::vector<std::string>& names,
                    const Matrix& values);

std::string confusion_matrix(const std::string& title, std::size_t tp, std::size_t fp,
                             std::size_t tn, std::size_t fn);

} // namespace svg

} // namespace mait
