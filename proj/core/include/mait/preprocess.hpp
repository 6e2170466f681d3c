#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mait/matrix.hpp"
#include "mait/table.hpp"

namespace mait {

// Every fitted transform records where it was fit; the pipeline's leakage
// audit asserts all of these say "train".
struct FitProvenance {
    std::string transform;
    std::string fit_split;
    std::size_t fit_row_count = 0;

    bool operator==(const FitProvenance&) const = default;
};

struct RareMergeState {
    // column -> categories kept as-is; everything else maps to "OTHER"
    std::map<std::string, std::set<std::string>> kept;
    double min_fraction = 0.0;
    FitProvenance provenance;

    bool operator==(const RareMergeState&) const = default;
};

RareMergeState fit_rare_merge(const Table& t, double min_fraction,
                              const std::string& fit_split = "train");
Table apply_rare_merge(const RareMergeState& s, const Table& t);

struct OneHotState {
    // categorical column name -> lexicographically sorted vocabulary
    std::vector<std::pair<std::string, std::vector<std::string>>> vocabularies;
    FitProvenance provenance;

    bool operator==(const OneHotState&) const = default;
};

OneHotState fit_one_hot(const Table& t, const std::string& fit_split = "train");
Table apply_one_hot(const OneHotState& s, const Table& t);

struct KnnImputeState {
    int k = 5;
    std::vector<std::string> feature_names;
    std::vector<double> donor_values; // row-major, NaN = missing
    std::size_t donor_rows = 0;
    FitProvenance provenance;

    // bitwise on the donor matrix: NaN-encoded missing cells must compare
    // equal to themselves for the frozen-state guarantee
    bool operator==(const KnnImputeState& o) const {
        return k == o.k && feature_names == o.feature_names && donor_rows == o.donor_rows &&
               provenance == o.provenance && donor_values.size() == o.donor_values.size() &&
               (donor_values.empty() ||
                std::memcmp(donor_values.data(), o.donor_values.data(),
                            donor_values.size() * sizeof(double)) == 0);
    }
};

KnnImputeState fit_knn_impute(const Table& t, int k, const std::string& fit_split = "train");
Table apply_knn_impute(const KnnImputeState& s, const Table& t);

struct RobustScaleState {
    std::vector<std::string> names;
    std::vector<double> median;
    std::vector<double> iqr;
    std::vector<std::uint8_t> flagged; // IQR == 0, passed through unscaled
    FitProvenance provenance;

    bool operator==(const RobustScaleState&) const = default;
};

RobustScaleState fit_robust_scale(const Table& t, const std::string& fit_split = "train");
Table apply_robust_scale(const RobustScaleState& s, const Table& t);

constexpr int kUnknownLabel = -1;

struct PropagationResult {
    std::vector<int> labels;
    std::vector<double> confidence;
    int iterations = 0;
};

// Classic RBF label propagation with clamping of known rows.
PropagationResult propagate_labels(const Matrix& x, std::span<const int> y, double sigma,
                                   int max_iter = 1000, double tol = 1e-6);

double median_pairwise_distance(const Matrix& x);

struct OversampleResult {
    Matrix x;
    std::vector<int> y;
    std::vector<std::size_t> indices; // into the original rows
};

OversampleResult random_oversample(const Matrix& x, std::span<const int> y, std::uint64_t seed);

} // namespace mait
