#include "mait/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mait/error.hpp"
#include "mait/rng.hpp"
#include "mait/stats.hpp"

namespace mait {

const char* to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::Continuous: return "continuous";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::BinaryOutcome: return "binary_outcome";
        case ColumnKind::ContinuousOutcome: return "continuous_outcome";
        case ColumnKind::TimeToEvent: return "time_to_event";
        case ColumnKind::EventIndicator: return "event_indicator";
        case ColumnKind::Identifier: return "identifier";
    }
    return "?";
}

std::optional<ColumnKind> column_kind_from_string(std::string_view s) {
    static const std::map<std::string_view, ColumnKind> lut = {
        {"continuous", ColumnKind::Continuous},
        {"categorical", ColumnKind::Categorical},
        {"binary_outcome", ColumnKind::BinaryOutcome},
        {"continuous_outcome", ColumnKind::ContinuousOutcome},
        {"time_to_event", ColumnKind::TimeToEvent},
        {"event_indicator", ColumnKind::EventIndicator},
        {"identifier", ColumnKind::Identifier},
    };
    auto it = lut.find(s);
    if (it == lut.end()) return std::nullopt;
    return it->second;
}

bool is_token_kind(ColumnKind k) {
    return k == ColumnKind::Categorical || k == ColumnKind::Identifier;
}

bool is_outcome_kind(ColumnKind k) {
    return k == ColumnKind::BinaryOutcome || k == ColumnKind::ContinuousOutcome ||
           k == ColumnKind::TimeToEvent || k == ColumnKind::EventIndicator;
}

Table::Table(std::vector<ColumnSpec> specs, std::size_t rows) : rows_(rows) {
    columns_.reserve(specs.size());
    for (auto& s : specs) {
        Column c;
        c.spec = std::move(s);
        if (c.is_token()) c.cat.resize(rows);
        else c.num.resize(rows, 0.0);
        c.missing.assign(rows, 0);
        columns_.push_back(std::move(c));
    }
}

std::optional<std::size_t> Table::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].spec.name == name) return i;
    return std::nullopt;
}

const Column& Table::column(std::string_view name) const {
    auto i = find_column(name);
    if (!i) throw DataError("no such column: " + std::string(name));
    return columns_[*i];
}

Column& Table::column(std::string_view name) {
    auto i = find_column(name);
    if (!i) throw DataError("no such column: " + std::string(name));
    return columns_[*i];
}

Table Table::take_rows(std::span<const std::size_t> idx) const {
    Table out;
    out.rows_ = idx.size();
    out.columns_.reserve(columns_.size());
    for (const auto& c : columns_) {
        Column nc;
        nc.spec = c.spec;
        nc.missing.resize(idx.size());
        if (c.is_token()) {
            nc.cat.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                nc.cat[i] = c.cat[idx[i]];
                nc.missing[i] = c.missing[idx[i]];
            }
        } else {
            nc.num.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                nc.num[i] = c.num[idx[i]];
                nc.missing[i] = c.missing[idx[i]];
            }
        }
        out.columns_.push_back(std::move(nc));
    }
    return out;
}

std::pair<Matrix, std::vector<std::string>> Table::continuous_features() const {
    std::vector<std::size_t> idx;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].spec.kind == ColumnKind::Continuous) {
            idx.push_back(i);
            names.push_back(columns_[i].spec.name);
        }
    }
    Matrix m(rows_, idx.size());
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto& c = columns_[idx[j]];
            m.at(r, j) = c.missing[r] ? kMissing : c.num[r];
        }
    }
    return {std::move(m), std::move(names)};
}

namespace {

// RFC-4180 reader: quoted fields may contain delimiters, quotes ("") and
// newlines. Returns one record per row.
std::vector<std::vector<std::string>> parse_delimited(const std::string& text, char delim) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty() && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (field_started || !field.empty() || !record.empty()) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        end_record();
    }
    return records;
}

std::string csv_escape(const std::string& s, char delim) {
    const bool needs_quotes =
        s.find(delim) != std::string::npos || s.find('"') != std::string::npos ||
        s.find('\n') != std::string::npos || s.find('\r') != std::string::npos;
    if (!needs_quotes) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace

Table load_table(const std::string& path, const std::vector<ColumnSpec>& specs,
                 const LoadOptions& opts) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open data file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();

    const std::size_t header_end = text.find('\n');
    const std::string header_line = text.substr(0, header_end);
    const char delim = header_line.find('\t') != std::string::npos ? '\t' : ',';

    auto records = parse_delimited(text, delim);
    if (records.empty()) throw DataError("empty file: " + path);

    const auto& header = records[0];
    std::map<std::string, const ColumnSpec*> by_name;
    for (const auto& s : specs) by_name[s.name] = &s;

    std::vector<ColumnSpec> ordered;
    ordered.reserve(header.size());
    for (const auto& h : header) {
        auto it = by_name.find(h);
        if (it == by_name.end())
            throw DataError("schema error: unknown header column \"" + h + "\"");
        ordered.push_back(*it->second);
    }
    if (ordered.size() != specs.size()) {
        std::set<std::string> seen(header.begin(), header.end());
        for (const auto& s : specs)
            if (!seen.count(s.name))
                throw DataError("schema error: column \"" + s.name + "\" missing from header");
    }

    const std::size_t n_rows = records.size() - 1;
    Table t(ordered, n_rows);

    auto is_sentinel = [&](const std::string& v) {
        return std::find(opts.missing_sentinels.begin(), opts.missing_sentinels.end(), v) !=
               opts.missing_sentinels.end();
    };

    for (std::size_t r = 0; r < n_rows; ++r) {
        const auto& rec = records[r + 1];
        if (rec.size() != header.size())
            throw DataError("row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                            " cells, expected " + std::to_string(header.size()));
        for (std::size_t c = 0; c < rec.size(); ++c) {
            Column& col = t.column(c);
            const std::string& v = rec[c];
            if (is_sentinel(v)) {
                col.missing[r] = 1;
                continue;
            }
            if (col.is_token()) {
                col.cat[r] = v;
            } else {
                double parsed = 0.0;
                const char* begin = v.data();
                const char* end = v.data() + v.size();
                while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
                auto [ptr, ec] = std::from_chars(begin, end, parsed);
                while (ptr < end && (*ptr == ' ' || *ptr == '\t')) ++ptr;
                if (ec != std::errc{} || ptr != end)
                    throw DataError("parse error at row " + std::to_string(r + 1) + ", column \"" +
                                    col.spec.name + "\": \"" + v + "\" is not numeric");
                col.num[r] = parsed;
            }
        }
    }
    return t;
}

void save_table(const Table& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write file: " + path);
    for (std::size_t c = 0; c < t.column_count(); ++c) {
        if (c) f << ',';
        f << csv_escape(t.column(c).spec.name, ',');
    }
    f << '\n';
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        for (std::size_t c = 0; c < t.column_count(); ++c) {
            if (c) f << ',';
            const Column& col = t.column(c);
            if (col.missing[r]) continue; // empty field -> MISSING
            if (col.is_token()) f << csv_escape(col.cat[r], ',');
            else f << fmt_num(col.num[r]);
        }
        f << '\n';
    }
}

std::vector<Violation> validate_table(const Table& t) {
    std::vector<Violation> out;
    std::set<std::string> names;
    bool has_time = false, has_event = false;
    std::size_t n_binary_outcomes = 0;
    for (const auto& c : t.columns()) {
        if (!names.insert(c.spec.name).second)
            out.push_back({"DUPLICATE_NAME", c.spec.name, -1, "duplicate column name"});
        if (c.spec.kind == ColumnKind::TimeToEvent) has_time = true;
        if (c.spec.kind == ColumnKind::EventIndicator) has_event = true;
        if (c.spec.kind == ColumnKind::BinaryOutcome) ++n_binary_outcomes;
    }
    if (has_time != has_event)
        out.push_back({"TIME_EVENT_PAIRING", "", -1,
                       "time_to_event and event_indicator must appear together"});
    if (n_binary_outcomes > 1)
        out.push_back({"MULTIPLE_BINARY_OUTCOME", "", -1,
                       "more than one binary_outcome column"});

    for (std::size_t ci = 0; ci < t.column_count(); ++ci) {
        const Column& c = t.column(ci);
        if (c.is_token()) continue;
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            if (c.missing[r]) continue;
            const double v = c.num[r];
            if (!std::isfinite(v)) {
                out.push_back({"NON_FINITE_VALUE", c.spec.name, static_cast<long long>(r),
                               "non-finite value"});
                continue;
            }
            switch (c.spec.kind) {
                case ColumnKind::TimeToEvent:
                    if (v < 0.0)
                        out.push_back({"NEGATIVE_DURATION", c.spec.name,
                                       static_cast<long long>(r), "negative duration"});
                    break;
                case ColumnKind::BinaryOutcome:
                    if (v != 0.0 && v != 1.0)
                        out.push_back({"NON_BINARY_OUTCOME", c.spec.name,
                                       static_cast<long long>(r), "outcome not in {0,1}"});
                    break;
                case ColumnKind::EventIndicator:
                    if (v != 0.0 && v != 1.0)
                        out.push_back({"NON_BINARY_EVENT", c.spec.name,
                                       static_cast<long long>(r), "event indicator not in {0,1}"});
                    break;
                default:
                    break;
            }
        }
    }
    return out;
}

std::vector<std::string> composite_key(const Table& t, const std::vector<std::string>& columns,
                                       int quantile_bins) {
    if (columns.empty()) throw ArgumentError("composite_key: empty column list");
    const std::size_t n = t.row_count();
    std::vector<std::vector<std::string>> parts(columns.size());

    for (std::size_t k = 0; k < columns.size(); ++k) {
        const Column& c = t.column(columns[k]);
        auto& tokens = parts[k];
        tokens.assign(n, "NA");
        if (c.spec.kind == ColumnKind::Continuous ||
            c.spec.kind == ColumnKind::ContinuousOutcome ||
            c.spec.kind == ColumnKind::TimeToEvent) {
            std::vector<double> observed;
            for (std::size_t r = 0; r < n; ++r)
                if (!c.missing[r]) observed.push_back(c.num[r]);
            if (observed.empty()) continue;
            std::sort(observed.begin(), observed.end());
            std::vector<double> edges;
            for (int i = 1; i < quantile_bins; ++i)
                edges.push_back(quantile_sorted(observed, static_cast<double>(i) / quantile_bins));
            for (std::size_t r = 0; r < n; ++r) {
                if (c.missing[r]) continue;
                int bin = 1;
                for (double e : edges)
                    if (c.num[r] > e) ++bin;
                tokens[r] = "Q" + std::to_string(bin);
            }
        } else if (c.is_token()) {
            for (std::size_t r = 0; r < n; ++r)
                if (!c.missing[r]) tokens[r] = c.cat[r];
        } else {
            // binary outcome / event indicator: format the number verbatim
            for (std::size_t r = 0; r < n; ++r)
                if (!c.missing[r]) tokens[r] = fmt_num(c.num[r]);
        }
    }

    std::vector<std::string> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::string key = parts[0][r];
        for (std::size_t k = 1; k < columns.size(); ++k) {
            key += '|';
            key += parts[k][r];
        }
        out[r] = std::move(key);
    }
    return out;
}

SplitPlan stratified_split(const Table& t, const std::vector<std::string>& strata,
                           double test_fraction, std::uint64_t seed) {
    if (strata.size() != t.row_count())
        throw ArgumentError("stratified_split: strata length != row count");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("stratified_split: test_fraction must be in (0,1)");

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < strata.size(); ++r) groups[strata[r]].push_back(r);

    SplitPlan plan;
    plan.strata = strata;
    plan.seed = seed;
    plan.test_fraction = test_fraction;

    for (auto& [token, rows] : groups) {
        if (rows.size() < 2) {
            plan.train_indices.insert(plan.train_indices.end(), rows.begin(), rows.end());
            continue;
        }
        Rng rng(derive_seed(seed, token));
        rng.shuffle(rows);
        // round half up
        const std::size_t n_test = static_cast<std::size_t>(
            std::floor(test_fraction * static_cast<double>(rows.size()) + 0.5));
        const std::size_t n_train = rows.size() - n_test;
        for (std::size_t i = 0; i < n_train; ++i) plan.train_indices.push_back(rows[i]);
        for (std::size_t i = n_train; i < rows.size(); ++i) plan.test_indices.push_back(rows[i]);
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    if (plan.test_indices.empty())
        throw DataError("stratified_split: test set is empty after assignment");
    return plan;
}

} // namespace mait
