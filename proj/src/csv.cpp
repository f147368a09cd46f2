#include "gridce/csv.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gridce {

int TimeSeriesTable::column(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return static_cast<int>(j);
    throw ValidationError("time series has no column '" + name + "'");
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    const auto e = s.find_last_not_of(" \t\r\"");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& v) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    return ec == std::errc() && ptr == e && std::isfinite(v);
}

int parse_int_field(const std::string& s, std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || ptr != s.data() + pos + len) throw ValidationError("bad ISO-8601 timestamp '" + s + "'");
    return v;
}

}  // namespace

double parse_iso8601_hours(const std::string& text) {
    std::string s = text;
    if (!s.empty() && s.back() == 'Z') s.pop_back();
    if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
        throw ValidationError("bad ISO-8601 timestamp '" + text + "'");
    using namespace std::chrono;
    const int y = parse_int_field(s, 0, 4);
    const int mo = parse_int_field(s, 5, 2);
    const int d = parse_int_field(s, 8, 2);
    const int h = parse_int_field(s, 11, 2);
    const int mi = parse_int_field(s, 14, 2);
    int sec = 0;
    if (s.size() >= 19) {
        if (s[16] != ':') throw ValidationError("bad ISO-8601 timestamp '" + text + "'");
        sec = parse_int_field(s, 17, 2);
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ValidationError("bad ISO-8601 date '" + text + "'");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return days * 24.0 + h + mi / 60.0 + sec / 3600.0;
}

TimeSeriesTable parse_time_series(const std::string& text, double step_minutes, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int row = 0;
    TimeSeriesTable t;
    std::vector<std::string> header;
    double t0 = 0.0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto cells = split_row(line);
        if (header.empty()) {
            header = cells;
            if (header.size() < 2) throw ValidationError(origin + ": need a time column and at least one series");
            t.names.assign(header.begin() + 1, header.end());
            t.columns.resize(t.names.size());
            continue;
        }
        const std::string where = origin + ":" + std::to_string(row);
        if (cells.size() != header.size()) throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields");
        double time_value = 0.0;
        const bool first = t.hours.empty();
        if (parse_double(cells[0], time_value)) {
            if (first) t.time_is_index = true;
            else if (!t.time_is_index) throw ValidationError(where + ": mixed time formats");
            if (!(step_minutes > 0.0)) throw ValidationError(where + ": step-index time column needs a step length");
            time_value *= step_minutes / 60.0;
        } else {
            if (!first && t.time_is_index) throw ValidationError(where + ": mixed time formats");
            try {
                time_value = parse_iso8601_hours(cells[0]);
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
        }
        if (first) t0 = time_value;
        const double h = time_value - t0;
        if (!first && !(h > t.hours.back())) throw ValidationError(where + ": time column must increase");
        t.hours.push_back(h);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double v = 0.0;
            if (!parse_double(cells[j], v))
                throw ValidationError(where + ": column '" + header[j] + "' is not a finite number");
            t.columns[j - 1].push_back(v);
        }
    }
    if (header.empty() || t.hours.empty()) throw ValidationError(origin + ": no data rows");
    return t;
}

TimeSeriesTable read_time_series(const std::filesystem::path& path, double step_minutes) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open time series '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_time_series(buf.str(), step_minutes, path.string());
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void write_time_series(const std::filesystem::path& path, const TimeGrid& grid, const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size()) throw DimensionError("write_time_series: names and columns differ in count");
    for (const auto& c : columns)
        if (static_cast<int>(c.size()) != grid.n_steps()) throw DimensionError("write_time_series: column length mismatch");
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << "step,hour";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (int k = 0; k < grid.n_steps(); ++k) {
        out << k << ',' << format_number(grid.time_hours(k));
        for (const auto& c : columns) out << ',' << format_number(c[static_cast<std::size_t>(k)]);
        out << '\n';
    }
}

}  // namespace gridce
