#pragma once

// Percentile-threshold tables ("threshold value at a given percentile"), the
// form in which published wealth and income distributions arrive.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfcmc/errors.hpp"

namespace sfcmc {

class WeightFunction;

struct PercentileRow {
    double percentile;  // fraction in (0, 1)
    double threshold;   // money
    bool operator==(const PercentileRow&) const = default;
};

struct PercentileTable {
    std::vector<PercentileRow> rows;
    std::string variable_code;  // e.g. thweal992j, tfiinc992j
    std::optional<int> year;
    std::string unit;

    bool operator==(const PercentileTable&) const = default;
};

enum class PercentileUnits { Auto, Fraction, Percent };

struct LoadOptions {
    PercentileUnits units = PercentileUnits::Auto;
    char delimiter = ',';
    double tie_tolerance = 1e-12;  // relative slack when checking thresholds are non-decreasing
};

enum class IngestErrorCode { MissingColumn, Unparseable, OutOfRange, DuplicatePercentile, NonMonotone, TooFewRows };

class IngestError : public Error {
public:
    IngestError(IngestErrorCode code, std::size_t line, const std::string& message);
    IngestErrorCode code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }  // 1-based source line, 0 when not tied to a line

private:
    IngestErrorCode code_;
    std::size_t line_;
};

// Delimiter-separated text with a header naming at least `percentile` and
// `value`; optional `variable`, `year` and `unit` columns become metadata.
PercentileTable load_percentile_table(std::istream& in, const LoadOptions& options = {});
PercentileTable load_percentile_table_file(const std::string& path, const LoadOptions& options = {});

// Canonical form: sorted fractional percentiles, shortest round-trip floats.
void write_percentile_table(std::ostream& out, const PercentileTable& table);

// Checks the table invariants; throws IngestError with line 0.
void validate_table(const PercentileTable& table);

PercentileTable synthesize_table(const WeightFunction& f, std::span<const double> percentiles);
std::vector<double> percentile_grid(double first, double last, double step);

}  // namespace sfcmc
