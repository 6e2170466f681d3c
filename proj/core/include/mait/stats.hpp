#pragma once

#include <span>
#include <string>
#include <vector>

namespace mait {

// Quantile of pre-sorted values with linear interpolation between order
// statistics: quantile p sits at fractional index (n-1)*p. This is the one
// quantile convention used everywhere in the library (scaling, binning,
// bootstrap percentiles) so that fixtures stay bit-exact.
double quantile_sorted(std::span<const double> sorted, double p);

// Copies, sorts, then delegates to quantile_sorted.
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> x);

// Unbiased (n-1) sample variance; 0 for fewer than 2 values.
double sample_variance(std::span<const double> x);

double weighted_mean(std::span<const double> x, std::span<const double> w);
double weighted_variance(std::span<const double> x, std::span<const double> w);

// Mid-ranks (1-based, ties get the average of their rank range).
std::vector<double> mid_ranks(std::span<const double> x);

// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Plug-in mutual information (nats) over the contingency table of two
// integer code vectors. Codes must be non-negative.
double plug_in_mi(std::span<const int> x_codes, std::span<const int> y_codes);

// Quantile-bins a numeric vector into `bins` codes in [0, bins); NaN-free
// input required. Bin edges come from quantile_sorted at i/bins.
std::vector<int> quantile_bin_codes(std::span<const double> x, int bins);

// Shortest round-trip decimal formatting via std::to_chars. Used for every
// number written to CSV/SVG/HTML so outputs are byte-stable.
std::string fmt_num(double v);
std::string fmt_num(std::size_t v);
std::string fmt_num(long long v);

} // namespace mait
