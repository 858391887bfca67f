#include "sfcmc/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "sfcmc/distributions.hpp"
#include "sfcmc/keyvalue.hpp"

namespace sfcmc {

IngestError::IngestError(IngestErrorCode code, std::size_t line, const std::string& message)
    : Error(ErrorKind::Input, line ? "line " + std::to_string(line) + ": " + message : message), code_(code), line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        out.emplace_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double parse_cell(const std::string& cell, std::size_t line, const char* what) {
    try {
        const double v = parse_double(cell);
        if (!std::isfinite(v)) throw ParameterDomainError("non-finite");
        return v;
    } catch (const ParameterDomainError&) {
        throw IngestError(IngestErrorCode::Unparseable, line, std::string("cannot parse ") + what + " '" + cell + "'");
    }
}

struct SourcedRow {
    PercentileRow row;
    std::size_t line;
};

void check_rows(const std::vector<SourcedRow>& rows, double tie_tolerance) {
    if (rows.size() < 3)
        throw IngestError(IngestErrorCode::TooFewRows, 0,
                          "a percentile table needs at least 3 rows, got " + std::to_string(rows.size()));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& prev = rows[i - 1];
        const auto& cur = rows[i];
        if (!(cur.row.percentile > prev.row.percentile))
            throw IngestError(IngestErrorCode::DuplicatePercentile, cur.line, "duplicate percentile");
        const double slack = tie_tolerance * std::abs(prev.row.threshold);
        if (cur.row.threshold < prev.row.threshold - slack) {
            // Report whichever of the pair appears later in the source.
            throw IngestError(IngestErrorCode::NonMonotone, std::max(cur.line, prev.line),
                              "thresholds decrease between percentiles " + format_double(prev.row.percentile) + " and " +
                                  format_double(cur.row.percentile));
        }
    }
}

}  // namespace

PercentileTable load_percentile_table(std::istream& in, const LoadOptions& options) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        header = split(line, options.delimiter);
    }
    if (header.empty()) throw IngestError(IngestErrorCode::MissingColumn, line_no, "missing header row");
    const std::size_t header_line = line_no;

    auto column = [&](const char* name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (lower(header[i]) == name) return i;
        return std::nullopt;
    };
    const auto p_col = column("percentile");
    const auto v_col = column("value");
    if (!p_col) throw IngestError(IngestErrorCode::MissingColumn, header_line, "header lacks a 'percentile' column");
    if (!v_col) throw IngestError(IngestErrorCode::MissingColumn, header_line, "header lacks a 'value' column");
    const auto var_col = column("variable");
    const auto year_col = column("year");
    const auto unit_col = column("unit");

    PercentileTable table;
    std::vector<SourcedRow> rows;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto cells = split(line, options.delimiter);
        if (cells.size() != header.size())
            throw IngestError(IngestErrorCode::Unparseable, line_no,
                              "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        SourcedRow r{{parse_cell(cells[*p_col], line_no, "percentile"), parse_cell(cells[*v_col], line_no, "value")}, line_no};
        rows.push_back(r);
        if (first_data) {
            if (var_col) table.variable_code = cells[*var_col];
            if (unit_col) table.unit = cells[*unit_col];
            if (year_col && !cells[*year_col].empty()) {
                int year = 0;
                const auto& y = cells[*year_col];
                auto res = std::from_chars(y.data(), y.data() + y.size(), year);
                if (res.ec != std::errc() || res.ptr != y.data() + y.size())
                    throw IngestError(IngestErrorCode::Unparseable, line_no, "cannot parse year '" + y + "'");
                table.year = year;
            }
            first_data = false;
        }
    }

    bool percent = options.units == PercentileUnits::Percent;
    if (options.units == PercentileUnits::Auto)
        percent = std::any_of(rows.begin(), rows.end(), [](const SourcedRow& r) { return r.row.percentile >= 1.0; });
    const double upper = percent ? 100.0 : 1.0;
    for (auto& r : rows) {
        if (!(r.row.percentile > 0.0 && r.row.percentile < upper))
            throw IngestError(IngestErrorCode::OutOfRange, r.line,
                              "percentile " + format_double(r.row.percentile) + " outside (0, " + format_double(upper) + ")");
        if (percent) r.row.percentile /= 100.0;
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SourcedRow& a, const SourcedRow& b) { return a.row.percentile < b.row.percentile; });
    check_rows(rows, options.tie_tolerance);
    for (const auto& r : rows) table.rows.push_back(r.row);
    return table;
}

PercentileTable load_percentile_table_file(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IngestError(IngestErrorCode::MissingColumn, 0, "cannot open '" + path + "'");
    return load_percentile_table(in, options);
}

void write_percentile_table(std::ostream& out, const PercentileTable& table) {
    const bool meta = !table.variable_code.empty() || table.year || !table.unit.empty();
    out << "percentile,value" << (meta ? ",variable,year,unit" : "") << '\n';
    for (const auto& row : table.rows) {
        out << format_double(row.percentile) << ',' << format_double(row.threshold);
        if (meta) out << ',' << table.variable_code << ',' << (table.year ? std::to_string(*table.year) : "") << ',' << table.unit;
        out << '\n';
    }
}

void validate_table(const PercentileTable& table) {
    std::vector<SourcedRow> rows;
    for (const auto& r : table.rows) {
        if (!(r.percentile > 0.0 && r.percentile < 1.0))
            throw IngestError(IngestErrorCode::OutOfRange, 0, "percentile outside (0, 1)");
        rows.push_back({r, 0});
    }
    check_rows(rows, 0.0);
}

PercentileTable synthesize_table(const WeightFunction& f, std::span<const double> percentiles) {
    PercentileTable table;
    for (double p : percentiles) table.rows.push_back({p, f.quantile(p)});
    validate_table(table);
    return table;
}

std::vector<double> percentile_grid(double first, double last, double step) {
    std::vector<double> grid;
    const auto n = static_cast<long>(std::llround((last - first) / step));
    for (long i = 0; i <= n; ++i) grid.push_back(first + static_cast<double>(i) * step);
    return grid;
}

}  // namespace sfcmc
