#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mait/matrix.hpp"

namespace mait {

enum class ColumnKind {
    Continuous,
    Categorical,
    BinaryOutcome,
    ContinuousOutcome,
    TimeToEvent,
    EventIndicator,
    Identifier,
};

const char* to_string(ColumnKind k);
std::optional<ColumnKind> column_kind_from_string(std::string_view s);

// Token-valued kinds are stored as strings, everything else as doubles.
bool is_token_kind(ColumnKind k);
bool is_outcome_kind(ColumnKind k);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<std::string> declared_categories; // optional, may be empty
};

struct Column {
    ColumnSpec spec;
    std::vector<double> num;        // numeric kinds
    std::vector<std::string> cat;   // token kinds
    std::vector<std::uint8_t> missing;

    bool is_token() const { return is_token_kind(spec.kind); }
};

class Table {
public:
    Table() = default;
    Table(std::vector<ColumnSpec> specs, std::size_t rows);

    std::size_t row_count() const { return rows_; }
    std::size_t column_count() const { return columns_.size(); }

    const std::vector<Column>& columns() const { return columns_; }
    std::vector<Column>& columns() { return columns_; }

    const Column& column(std::size_t i) const { return columns_[i]; }
    Column& column(std::size_t i) { return columns_[i]; }

    // Throws DataError when absent.
    const Column& column(std::string_view name) const;
    Column& column(std::string_view name);
    std::optional<std::size_t> find_column(std::string_view name) const;

    bool cell_missing(std::size_t row, std::size_t col) const {
        return columns_[col].missing[row] != 0;
    }
    double number_at(std::size_t row, std::size_t col) const {
        return columns_[col].num[row];
    }
    const std::string& token_at(std::size_t row, std::size_t col) const {
        return columns_[col].cat[row];
    }

    Table take_rows(std::span<const std::size_t> idx) const;

    // Continuous-kind feature columns (excludes outcomes, time, event, id)
    // as a dense matrix with NaN for missing, plus their names.
    std::pair<Matrix, std::vector<std::string>> continuous_features() const;

private:
    std::vector<Column> columns_;
    std::size_t rows_ = 0;
};

struct LoadOptions {
    std::vector<std::string> missing_sentinels = {"", "NA", "NaN", "null"};
};

Table load_table(const std::string& path, const std::vector<ColumnSpec>& specs,
                 const LoadOptions& opts = {});

// RFC-4180 output; used by the round-trip property and the report.
void save_table(const Table& t, const std::string& path);

struct Violation {
    std::string code;
    std::string column;
    long long row = -1; // -1 when not row-specific
    std::string detail;
};

std::vector<Violation> validate_table(const Table& t);

// Per-row stratum tokens: continuous columns quantile-binned (Q1..Qn),
// token kinds verbatim, numeric outcomes formatted, MISSING -> "NA",
// joined with '|'.
std::vector<std::string> composite_key(const Table& t, const std::vector<std::string>& columns,
                                       int quantile_bins = 4);

struct SplitPlan {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<std::string> strata;
    std::uint64_t seed = 0;
    double test_fraction = 0.0;
};

SplitPlan stratified_split(const Table& t, const std::vector<std::string>& strata,
                           double test_fraction, std::uint64_t seed);

} // namespace mait
