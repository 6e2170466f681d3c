#include <algorithm>
#include <cmath>
#include <sstream>

#include "mait/report.hpp"
#include "mait/stats.hpp"

namespace mait::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 16.0;
constexpr double kMarginTop = 36.0;
constexpr double kMarginBottom = 52.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string esc(const std::string& s) {
    std::string out;
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

struct Range {
    double lo = 0.0, hi = 1.0;

    double scale(double v, double out_lo, double out_hi) const {
        if (hi == lo) return (out_lo + out_hi) / 2.0;
        return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
    }
};

Range data_range(const std::vector<Series>& series, bool use_x) {
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& s : series) {
        const auto& v = use_x ? s.x : s.y;
        for (double q : v) {
            if (!std::isfinite(q)) continue;
            r.lo = std::min(r.lo, q);
            r.hi = std::max(r.hi, q);
        }
    }
    if (!std::isfinite(r.lo)) return {0.0, 1.0};
    if (r.lo == r.hi) {
        r.lo -= 0.5;
        r.hi += 0.5;
    }
    return r;
}

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    const double span = hi - lo;
    if (span <= 0.0) return {lo};
    const double raw_step = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
    double step = mag;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (mag * m >= raw_step) {
            step = mag * m;
            break;
        }
    }
    std::vector<double> ticks;
    double t = std::ceil(lo / step) * step;
    while (t <= hi + step * 1e-9) {
        ticks.push_back(std::fabs(t) < step * 1e-9 ? 0.0 : t);
        t += step;
    }
    return ticks;
}

void open_svg(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(kWidth)
        << "\" height=\"" << fmt_num(kHeight) << "\" viewBox=\"0 0 " << fmt_num(kWidth) << ' '
        << fmt_num(kHeight) << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt_num(kWidth / 2)
        << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Range& xr, const Range& yr,
               const std::string& x_label, const std::string& y_label) {
    const double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
    const double y0 = kHeight - kMarginBottom, y1 = kMarginTop;
    out << "<line x1=\"" << fmt_num(x0) << "\" y1=\"" << fmt_num(y0) << "\" x2=\"" << fmt_num(x1)
        << "\" y2=\"" << fmt_num(y0) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << fmt_num(x0) << "\" y1=\"" << fmt_num(y0) << "\" x2=\"" << fmt_num(x0)
        << "\" y2=\"" << fmt_num(y1) << "\" stroke=\"black\"/>\n";
    for (double t : nice_ticks(xr.lo, xr.hi)) {
        const double px = xr.scale(t, x0, x1);
        out << "<line x1=\"" << fmt_num(px) << "\" y1=\"" << fmt_num(y0) << "\" x2=\""
            << fmt_num(px) << "\" y2=\"" << fmt_num(y0 + 4) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt_num(px) << "\" y=\"" << fmt_num(y0 + 18)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_num(t) << "</text>\n";
    }
    for (double t : nice_ticks(yr.lo, yr.hi)) {
        const double py = yr.scale(t, y0, y1);
        out << "<line x1=\"" << fmt_num(x0 - 4) << "\" y1=\"" << fmt_num(py) << "\" x2=\""
            << fmt_num(x0) << "\" y2=\"" << fmt_num(py) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt_num(x0 - 8) << "\" y=\"" << fmt_num(py + 3)
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_num(t) << "</text>\n";
    }
    out << "<text x=\"" << fmt_num((x0 + x1) / 2) << "\" y=\"" << fmt_num(kHeight - 10)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << esc(x_label) << "</text>\n";
    out << "<text x=\"14\" y=\"" << fmt_num((y0 + y1) / 2)
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
        << fmt_num((y0 + y1) / 2) << ")\">" << esc(y_label) << "</text>\n";
}

} // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       bool diagonal) {
    std::ostringstream out;
    open_svg(out, title);
    Range xr = data_range(series, true);
    Range yr = data_range(series, false);
    const double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
    const double y0 = kHeight - kMarginBottom, y1 = kMarginTop;
    draw_axes(out, xr, yr, x_label, y_label);

    if (diagonal) {
        out << "<line x1=\"" << fmt_num(xr.scale(xr.lo, x0, x1)) << "\" y1=\""
            << fmt_num(yr.scale(xr.lo, y0, y1)) << "\" x2=\"" << fmt_num(xr.scale(xr.hi, x0, x1))
            << "\" y2=\"" << fmt_num(yr.scale(xr.hi, y0, y1))
            << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::string color = s.color.empty() ? kPalette[si % 8] : s.color;
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            if (s.step && i > 0) {
                out << fmt_num(xr.scale(s.x[i], x0, x1)) << ','
                    << fmt_num(yr.scale(s.y[i - 1], y0, y1)) << ' ';
            }
            out << fmt_num(xr.scale(s.x[i], x0, x1)) << ',' << fmt_num(yr.scale(s.y[i], y0, y1))
                << ' ';
        }
        out << "\"/>\n";
        // legend
        const double ly = kMarginTop + 14.0 * static_cast<double>(si);
        out << "<line x1=\"" << fmt_num(x1 - 130) << "\" y1=\"" << fmt_num(ly) << "\" x2=\""
            << fmt_num(x1 - 110) << "\" y2=\"" << fmt_num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << fmt_num(x1 - 105) << "\" y=\"" << fmt_num(ly + 3)
            << "\" font-size=\"10\">" << esc(s.label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string bar_chart(const std::string& title, const std::string& value_label,
                      const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
    std::ostringstream out;
    const double row_h = 18.0;
    const double height = kMarginTop + row_h * static_cast<double>(labels.size()) + 40.0;
    const double left = 170.0, right = kWidth - 20.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(kWidth)
        << "\" height=\"" << fmt_num(height) << "\" viewBox=\"0 0 " << fmt_num(kWidth) << ' '
        << fmt_num(height) << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt_num(kWidth / 2)
        << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";

    double hi = 0.0, lo = 0.0;
    for (double v : values) {
        hi = std::max(hi, v);
        lo = std::min(lo, v);
    }
    if (hi == lo) hi = lo + 1.0;
    Range r{lo, hi};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double y = kMarginTop + row_h * static_cast<double>(i);
        const double zero_px = r.scale(0.0, left, right);
        const double val_px = r.scale(values[i], left, right);
        out << "<text x=\"" << fmt_num(left - 6) << "\" y=\"" << fmt_num(y + 12)
            << "\" text-anchor=\"end\" font-size=\"10\">" << esc(labels[i]) << "</text>\n";
        out << "<rect x=\"" << fmt_num(std::min(zero_px, val_px)) << "\" y=\"" << fmt_num(y + 3)
            << "\" width=\"" << fmt_num(std::fabs(val_px - zero_px)) << "\" height=\"12\" fill=\""
            << kPalette[0] << "\"/>\n";
        out << "<text x=\"" << fmt_num(std::max(zero_px, val_px) + 4) << "\" y=\""
            << fmt_num(y + 12) << "\" font-size=\"9\">" << fmt_num(values[i]) << "</text>\n";
    }
    out << "<text x=\"" << fmt_num((left + right) / 2) << "\" y=\"" << fmt_num(height - 8)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << esc(value_label) << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

std::string heatmap(const std::string& title, const std::vector<std::string>& names,
                    const Matrix& values) {
    std::ostringstream out;
    const std::size_t n = names.size();
    const double cell = std::min(28.0, 420.0 / std::max<std::size_t>(1, n));
    const double left = 150.0, top = 140.0;
    const double width = left + cell * n + 40.0;
    const double height = top + cell * n + 30.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(width)
        << "\" height=\"" << fmt_num(height) << "\" viewBox=\"0 0 " << fmt_num(width) << ' '
        << fmt_num(height) << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt_num(width / 2)
        << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";

    auto color_of = [](double v) {
        // blue (-1) .. white (0) .. red (+1)
        if (std::isnan(v)) return std::string("#dddddd");
        const double c = std::clamp(v, -1.0, 1.0);
        int rch = 255, gch = 255, bch = 255;
        if (c >= 0) {
            gch = bch = static_cast<int>(std::lround(255.0 * (1.0 - c)));
        } else {
            rch = gch = static_cast<int>(std::lround(255.0 * (1.0 + c)));
        }
        char buf[8];
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rch, gch, bch);
        return std::string(buf);
    };

    for (std::size_t i = 0; i < n; ++i) {
        out << "<text x=\"" << fmt_num(left - 6) << "\" y=\"" << fmt_num(top + cell * i + cell / 2 + 3)
            << "\" text-anchor=\"end\" font-size=\"9\">" << esc(names[i]) << "</text>\n";
        out << "<text x=\"" << fmt_num(left + cell * i + cell / 2) << "\" y=\"" << fmt_num(top - 6)
            << "\" font-size=\"9\" text-anchor=\"start\" transform=\"rotate(-60 "
            << fmt_num(left + cell * i + cell / 2) << ' ' << fmt_num(top - 6) << ")\">"
            << esc(names[i]) << "</text>\n";
        for (std::size_t j = 0; j < n; ++j) {
            const double v = values.at(i, j);
            out << "<rect x=\"" << fmt_num(left + cell * j) << "\" y=\"" << fmt_num(top + cell * i)
                << "\" width=\"" << fmt_num(cell) << "\" height=\"" << fmt_num(cell) << "\" fill=\""
                << color_of(v) << "\" stroke=\"#f0f0f0\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::string confusion_matrix(const std::string& title, std::size_t tp, std::size_t fp,
                             std::size_t tn, std::size_t fn) {
    std::ostringstream out;
    const double cell = 110.0, left = 150.0, top = 90.0;
    const double width = left + 2 * cell + 40.0, height = top + 2 * cell + 40.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_num(width)
        << "\" height=\"" << fmt_num(height) << "\" viewBox=\"0 0 " << fmt_num(width) << ' '
        << fmt_num(height) << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt_num(width / 2)
        << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";

    const std::size_t total = tp + fp + tn + fn;
    struct CellDef {
        std::size_t value;
        int row, col;
        const char* label;
    };
    const CellDef cells[] = {
        {tp, 0, 0, "TP"}, {fp, 0, 1, "FP"}, {fn, 1, 0, "FN"}, {tn, 1, 1, "TN"}};
    for (const auto& c : cells) {
        const double frac = total ? static_cast<double>(c.value) / total : 0.0;
        const int shade = static_cast<int>(std::lround(255.0 * (1.0 - 0.75 * frac)));
        char color[8];
        std::snprintf(color, sizeof(color), "#%02x%02xff", shade, shade);
        const double x = left + c.col * cell, y = top + c.row * cell;
        out << "<rect x=\"" << fmt_num(x) << "\" y=\"" << fmt_num(y) << "\" width=\""
            << fmt_num(cell) << "\" height=\"" << fmt_num(cell) << "\" fill=\"" << color
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt_num(x + cell / 2) << "\" y=\"" << fmt_num(y + cell / 2 - 6)
            << "\" text-anchor=\"middle\" font-size=\"12\">" << c.label << "</text>\n";
        out << "<text x=\"" << fmt_num(x + cell / 2) << "\" y=\"" << fmt_num(y + cell / 2 + 14)
            << "\" text-anchor=\"middle\" font-size=\"16\">" << c.value << "</text>\n";
    }
    out << "<text x=\"" << fmt_num(left + cell) << "\" y=\"" << fmt_num(top - 34)
        << "\" text-anchor=\"middle\" font-size=\"12\">observed</text>\n";
    out << "<text x=\"" << fmt_num(left + cell / 2) << "\" y=\"" << fmt_num(top - 14)
        << "\" text-anchor=\"middle\" font-size=\"11\">positive</text>\n";
    out << "<text x=\"" << fmt_num(left + cell * 1.5) << "\" y=\"" << fmt_num(top - 14)
        << "\" text-anchor=\"middle\" font-size=\"11\">negative</text>\n";
    out << "<text x=\"" << fmt_num(left - 110) << "\" y=\"" << fmt_num(top + cell / 2)
        << "\" font-size=\"11\">predicted positive</text>\n";
    out << "<text x=\"" << fmt_num(left - 110) << "\" y=\"" << fmt_num(top + cell * 1.5)
        << "\" font-size=\"11\">predicted negative</text>\n";
    out << "</svg>\n";
    return out.str();
}

} // namespace mait::svg
