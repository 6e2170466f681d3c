#include "mait/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "mait/error.hpp"

namespace mait {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ArgumentError("quantile of empty range");
    if (sorted.size() == 1) return sorted[0];
    if (p <= 0.0) return sorted.front();
    if (p >= 1.0) return sorted.back();
    const double pos = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / (static_cast<double>(x.size()) - 1.0);
}

double weighted_mean(std::span<const double> x, std::span<const double> w) {
    double sw = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
    }
    return sw > 0.0 ? sx / sw : 0.0;
}

double weighted_variance(std::span<const double> x, std::span<const double> w) {
    const double m = weighted_mean(x, w);
    double sw = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        ss += w[i] * (x[i] - m) * (x[i] - m);
    }
    return sw > 0.0 ? ss / sw : 0.0;
}

std::vector<double> mid_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double plug_in_mi(std::span<const int> x_codes, std::span<const int> y_codes) {
    const std::size_t n = x_codes.size();
    if (n == 0) return 0.0;
    int xc = 0, yc = 0;
    for (int v : x_codes) xc = std::max(xc, v + 1);
    for (int v : y_codes) yc = std::max(yc, v + 1);
    std::vector<double> joint(static_cast<std::size_t>(xc) * yc, 0.0);
    std::vector<double> px(xc, 0.0), py(yc, 0.0);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        joint[static_cast<std::size_t>(x_codes[i]) * yc + y_codes[i]] += inv;
        px[x_codes[i]] += inv;
        py[y_codes[i]] += inv;
    }
    double mi = 0.0;
    for (int a = 0; a < xc; ++a) {
        for (int b = 0; b < yc; ++b) {
            const double pxy = joint[static_cast<std::size_t>(a) * yc + b];
            if (pxy > 0.0) mi += pxy * std::log(pxy / (px[a] * py[b]));
        }
    }
    return std::max(0.0, mi);
}

std::vector<int> quantile_bin_codes(std::span<const double> x, int bins) {
    if (bins < 1) throw ArgumentError("quantile_bin_codes: bins must be >= 1");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    edges.reserve(bins - 1);
    for (int i = 1; i < bins; ++i) {
        edges.push_back(quantile_sorted(sorted, static_cast<double>(i) / bins));
    }
    std::vector<int> codes(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        int k = 0;
        for (double e : edges)
            if (x[i] > e) ++k;
        codes[i] = k;
    }
    return codes;
}

std::string fmt_num(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fmt_num(std::size_t v) { return std::to_string(v); }
std::string fmt_num(long long v) { return std::to_string(v); }

} // namespace mait
