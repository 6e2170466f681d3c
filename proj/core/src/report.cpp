#include "mait/report.hpp"

#include <filesystem>
#include <fstream>

#include "mait/error.hpp"
#include "mait/stats.hpp"

namespace fs = std::filesystem;

namespace mait {

namespace {

std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string csv_field(const std::string& s) {
    const bool quote = s.find(',') != std::string::npos || s.find('"') != std::string::npos ||
                       s.find('\n') != std::string::npos;
    if (!quote) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

void write_file(const fs::path& path, const std::string& content,
                std::vector<std::string>& created) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << content;
    if (!f) throw IoError("write failed for " + path.string());
    created.push_back(path.string());
}

std::string render_csv(const TableData& t) {
    std::string out;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (c) out += ',';
        out += csv_field(t.header[c]);
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += csv_field(row[c]);
        }
        out += '\n';
    }
    return out;
}

const char* kStyle = R"(
body { font-family: -apple-system, "Segoe UI", Helvetica, Arial, sans-serif;
       margin: 2em auto; max-width: 62em; color: #1a1a1a; }
h1 { border-bottom: 2px solid #1f77b4; padding-bottom: 0.2em; }
h2 { color: #1f77b4; margin-top: 2em; }
table { border-collapse: collapse; margin: 1em 0; font-size: 0.85em; }
th, td { border: 1px solid #ccc; padding: 3px 9px; text-align: right; }
th { background: #eef3f8; }
td:first-child, th:first-child { text-align: left; }
figure { margin: 1em 0; }
figcaption { font-size: 0.85em; color: #555; }
.provenance { background: #f6f6f6; border: 1px solid #ddd; padding: 0.6em 1em;
              font-size: 0.85em; margin-top: 2em; }
)";

} // namespace

RenderResult render_report(const ReportBundle& bundle, const std::string& out_dir) {
    std::vector<std::string> created;
    RenderResult res;
    try {
        const fs::path root(out_dir);
        fs::create_directories(root / "tables");
        fs::create_directories(root / "figures");
        if (!bundle.models.empty()) fs::create_directories(root / "models");

        std::string html;
        html += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
        html += "<title>MAIT benchmarking report</title>\n<style>";
        html += kStyle;
        html += "</style>\n</head>\n<body>\n<h1>MAIT benchmarking report</h1>\n";

        for (const auto& section : bundle.sections) {
            html += "<h2 id=\"" + html_escape(section.id) + "\">" + html_escape(section.title) +
                    "</h2>\n";
            for (const auto& p : section.paragraphs)
                html += "<p>" + html_escape(p) + "</p>\n";
            for (const auto& t : section.tables) {
                const fs::path csv_path = root / "tables" / (t.name + ".csv");
                write_file(csv_path, render_csv(t), created);
                res.csv_files.push_back(csv_path.string());

                html += "<h3>" + html_escape(t.title) + "</h3>\n<table data-csv=\"tables/" +
                        html_escape(t.name) + ".csv\">\n<tr>";
                for (const auto& h : t.header) html += "<th>" + html_escape(h) + "</th>";
                html += "</tr>\n";
                for (const auto& row : t.rows) {
                    html += "<tr>";
                    for (const auto& cell : row) html += "<td>" + html_escape(cell) + "</td>";
                    html += "</tr>\n";
                }
                html += "</table>\n";
            }
            for (const auto& fig : section.figures) {
                const fs::path svg_path = root / "figures" / (fig.name + ".svg");
                write_file(svg_path, fig.svg, created);
                res.svg_files.push_back(svg_path.string());

                html += "<figure>\n" + fig.svg + "<figcaption>" + html_escape(fig.title) +
                        "</figcaption>\n</figure>\n";
            }
        }

        for (const auto& model : bundle.models) {
            const fs::path mp = root / "models" / (model.name + ".model");
            write_file(mp, model.content, created);
            res.model_files.push_back(mp.string());
        }

        html += "<div class=\"provenance\"><b>Provenance</b><br>config hash: " +
                html_escape(bundle.provenance.config_hash) +
                "<br>seed: " + std::to_string(bundle.provenance.seed) +
                "<br>threads: " + std::to_string(bundle.provenance.threads) +
                "<br>format: " + html_escape(bundle.provenance.format_version) + "</div>\n";
        html += "</body>\n</html>\n";

        const fs::path html_path = root / "report.html";
        write_file(html_path, html, created);
        res.html_path = html_path.string();
        return res;
    } catch (...) {
        // never leave partial output behind
        for (const auto& f : created) {
            std::error_code ec;
            fs::remove(f, ec);
        }
        throw;
    }
}

} // namespace mait
