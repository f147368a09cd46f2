#pragma once

// CSV time series: a header row, a time column (ISO-8601 timestamp or integer
// step index) and one numeric column per series.

#include <filesystem>
#include <string>
#include <vector>

#include "gridce/model.hpp"

namespace gridce {

struct TimeSeriesTable {
    std::vector<std::string> names;            // value column names
    std::vector<double> hours;                 // sample start times relative to the first row
    std::vector<std::vector<double>> columns;  // columns[j][i] is series j at row i
    bool time_is_index = false;

    // Index of the named column; throws ValidationError if absent.
    int column(const std::string& name) const;
};

// Parses "YYYY-MM-DDTHH:MM[:SS]" (a space may replace 'T'; a trailing 'Z' is
// accepted). Returns hours since the Unix epoch.
double parse_iso8601_hours(const std::string& text);

// step_minutes converts an integer time column into hours; it is ignored for
// ISO-8601 timestamps. Throws ValidationError with a row number on malformed
// input.
TimeSeriesTable read_time_series(const std::filesystem::path& path, double step_minutes);
TimeSeriesTable parse_time_series(const std::string& text, double step_minutes, const std::string& origin);

// Writes `step` as the time column followed by `hour` and the series.
void write_time_series(const std::filesystem::path& path, const TimeGrid& grid,
                       const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns);

// Shortest round-tripping decimal form used by every writer.
std::string format_number(double v);

}  // namespace gridce
