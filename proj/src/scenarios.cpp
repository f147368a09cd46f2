#include "gridce/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridce/csv.hpp"

namespace gridce {

using json = nlohmann::json;

std::pair<int, int> event_window(const TimeGrid& grid, double start_hours, double duration_minutes) {
    if (!(duration_minutes > 0.0)) throw ValidationError("event: duration must be positive");
    const double dt = grid.dt_hours();
    const double end_hours = start_hours + duration_minutes / 60.0;
    if (start_hours < -1e-9 || end_hours > grid.horizon_hours() + 1e-9)
        throw ValidationError("event: window must lie inside the horizon");
    const int first = static_cast<int>(std::lround(start_hours / dt));
    const int last = static_cast<int>(std::lround(end_hours / dt));
    const int steps = std::min(last, grid.n_steps()) - first;
    if (steps <= 0) throw ValidationError("event: window shorter than one step");
    return {first, steps};
}

Trajectory build_cpp_price(const TimeGrid& grid, const CppEvent& event) {
    event.validate(grid);
    const auto [start, steps] = event_window(grid, event.start_hours, event.duration_minutes);
    std::vector<double> p(static_cast<std::size_t>(grid.n_steps()), event.base_price);
    for (int k = start; k < start + steps; ++k) p[static_cast<std::size_t>(k)] = event.base_price * (1.0 + event.uplift_fraction);
    return Trajectory(grid, std::move(p), Unit::PricePerMWh);
}

Trajectory build_scarcity_netload(const TimeGrid& grid, const Trajectory& nominal, double bump_gw, double start_hours,
                                  double duration_minutes) {
    require_on_grid(nominal, grid, Unit::GW, "scarcity nominal load");
    if (!std::isfinite(bump_gw)) throw ValidationError("scarcity: bump must be finite");
    const auto [start, steps] = event_window(grid, start_hours, duration_minutes);
    std::vector<double> v(nominal.vector());
    for (int k = start; k < start + steps; ++k) v[static_cast<std::size_t>(k)] += bump_gw;
    return Trajectory(grid, std::move(v), Unit::GW);
}

std::vector<double> resample_hold(const TimeGrid& grid, std::span<const double> hours, std::span<const double> values) {
    if (hours.size() != values.size() || hours.empty()) throw DimensionError("resample: need matching non-empty samples");
    const int n = grid.n_steps();
    const double dt = grid.dt_hours();
    const std::size_t m = hours.size();
    // Sample j holds on [hours[j], hours[j+1]); the first value extends back
    // and the last one forward.
    auto seg_lo = [&](std::size_t j) { return j == 0 ? -INFINITY : hours[j]; };
    auto seg_hi = [&](std::size_t j) { return j + 1 == m ? INFINITY : hours[j + 1]; };
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    std::size_t j = 0;
    for (int k = 0; k < n; ++k) {
        const double a = k * dt;
        const double b = (k + 1) * dt;
        while (seg_hi(j) <= a) ++j;
        double acc = 0.0;
        for (std::size_t i = j; i < m && seg_lo(i) < b; ++i)
            acc += values[i] * (std::min(b, seg_hi(i)) - std::max(a, seg_lo(i)));
        out[static_cast<std::size_t>(k)] = acc / dt;
    }
    return out;
}

// --- config scenarios -----------------------------------------------------------

Scenario ScenarioConfig::cpp_scenario() const {
    if (!cpp) throw ValidationError("config has no cpp event");
    Scenario s = scenario;
    s.exogenous_price = build_cpp_price(s.grid, *cpp);
    return s;
}

Scenario ScenarioConfig::equilibrium_scenario() const {
    Scenario s = scenario;
    s.exogenous_price.reset();
    if (scarcity)
        s.inflexible_load = build_scarcity_netload(s.grid, s.inflexible_load, scarcity->magnitude_gw,
                                                   scarcity->start_hours, scarcity->duration_minutes);
    return s;
}

std::vector<int> infeasible_indices(const Scenario& s) {
    std::vector<int> bad;
    const Trajectory base = s.inflexible_load + s.total_baseline();
    const Trajectory lo = s.total_dev_min();
    const Trajectory hi = s.total_dev_max();
    for (int k = 0; k < s.grid.n_steps(); ++k)
        if (base[k] + lo[k] > s.supplier.g_max || base[k] + hi[k] < s.supplier.g_min) bad.push_back(k);
    return bad;
}

void check_feasible(const Scenario& s) {
    auto bad = infeasible_indices(s);
    if (bad.empty()) return;
    std::ostringstream os;
    os << "scenario infeasible: balance cannot be met within supplier bounds at " << bad.size()
       << " step(s), first at step " << bad.front();
    throw InfeasibleError(os.str(), std::move(bad));
}

// --- JSON parsing -----------------------------------------------------------------

namespace {

std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

void allow_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ParseError(ptr.empty() ? "/" : ptr, "expected an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!ok.contains(k)) throw ParseError(child(ptr, k), "unknown key");
}

double number(const json& j, const std::string& ptr, const char* key, std::optional<double> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ParseError(child(ptr, key), "required number is missing");
    }
    const json& v = j.at(key);
    if (!v.is_number()) throw ParseError(child(ptr, key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(child(ptr, key), "must be finite");
    return d;
}

int integer(const json& j, const std::string& ptr, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ParseError(child(ptr, key), "expected an integer");
    return v.get<int>();
}

std::string text(const json& j, const std::string& ptr, const char* key, std::optional<std::string> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        throw ParseError(child(ptr, key), "required string is missing");
    }
    if (!j.at(key).is_string()) throw ParseError(child(ptr, key), "expected a string");
    return j.at(key).get<std::string>();
}

// Hour of day at the middle of step k.
double mid_hour(const TimeGrid& grid, int k) { return std::fmod((k + 0.5) * grid.dt_hours(), 24.0); }

double bump(double h, double center, double width) {
    double d = std::abs(h - center);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * d * d / (width * width));
}

std::vector<double> shape_values(const std::string& shape, const TimeGrid& grid, double level, double amp,
                                 const std::string& ptr) {
    const int n = grid.n_steps();
    std::vector<double> v(static_cast<std::size_t>(n));
    constexpr double pi = std::numbers::pi;
    for (int k = 0; k < n; ++k) {
        const double h = mid_hour(grid, k);
        double f = 0.0;
        if (shape == "flat") f = 0.0;
        else if (shape == "afternoon") f = std::cos(2.0 * pi * (h - 16.0) / 24.0);
        else if (shape == "morning_evening") f = std::cos(4.0 * pi * (h - 7.5) / 24.0);
        else if (shape == "duck") f = bump(h, 19.0, 2.0) - 0.8 * bump(h, 13.0, 2.5) - 0.1;
        else if (shape == "daytime") f = bump(h, 13.0, 3.0) - 0.3;
        else throw ParseError(child(ptr, "shape"), "unknown profile shape '" + shape + "'");
        v[static_cast<std::size_t>(k)] = std::max(0.0, level * (1.0 + amp * f));
    }
    return v;
}

Trajectory parse_profile(const json& j, const std::string& ptr, const TimeGrid& grid,
                         const std::filesystem::path& base_dir) {
    if (j.is_number()) return Trajectory::constant(grid, number(json{{"v", j}}, ptr, "v"), Unit::GW);
    if (!j.is_object()) throw ParseError(ptr, "expected a number or a profile object");
    const std::string shape = text(j, ptr, "shape");
    try {
        if (shape == "values") {
            allow_keys(j, ptr, {"shape", "values", "step_minutes"});
            const json& vals = j.contains("values") ? j.at("values") : throw ParseError(child(ptr, "values"), "missing");
            if (!vals.is_array() || vals.empty()) throw ParseError(child(ptr, "values"), "expected a non-empty array");
            std::vector<double> v;
            for (std::size_t i = 0; i < vals.size(); ++i) {
                if (!vals[i].is_number()) throw ParseError(child(child(ptr, "values"), i), "expected a number");
                v.push_back(vals[i].get<double>());
            }
            const double step = number(j, ptr, "step_minutes", grid.step_minutes());
            if (!(step > 0.0)) throw ParseError(child(ptr, "step_minutes"), "must be positive");
            if (step == grid.step_minutes() && static_cast<int>(v.size()) == grid.n_steps())
                return Trajectory(grid, std::move(v), Unit::GW);
            std::vector<double> hours(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) hours[i] = static_cast<double>(i) * step / 60.0;
            return Trajectory(grid, resample_hold(grid, hours, v), Unit::GW);
        }
        if (shape == "csv") {
            allow_keys(j, ptr, {"shape", "path", "column", "step_minutes", "scale"});
            std::filesystem::path path = text(j, ptr, "path");
            if (path.is_relative()) path = base_dir / path;
            const double step = number(j, ptr, "step_minutes", grid.step_minutes());
            const double scale = number(j, ptr, "scale", 1.0);
            TimeSeriesTable t = read_time_series(path, step);
            const int col = j.contains("column") ? t.column(text(j, ptr, "column")) : 0;
            std::vector<double> v = resample_hold(grid, t.hours, t.columns[static_cast<std::size_t>(col)]);
            for (double& x : v) x *= scale;
            return Trajectory(grid, std::move(v), Unit::GW);
        }
        allow_keys(j, ptr, {"shape", "level", "amplitude"});
        return Trajectory(grid, shape_values(shape, grid, number(j, ptr, "level"), number(j, ptr, "amplitude", 0.0), ptr),
                          Unit::GW);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(ptr, e.what());
    }
}

SupplierModel parse_supplier(const json& j, const std::string& ptr, double default_g0) {
    allow_keys(j, ptr, {"a0", "a1", "a2", "ramp_cost", "g_min", "g_max", "g0"});
    SupplierModel s;
    s.a0 = number(j, ptr, "a0", 0.0);
    s.a1 = number(j, ptr, "a1", 0.0);
    s.a2 = number(j, ptr, "a2", 0.0);
    s.ramp_cost = number(j, ptr, "ramp_cost", 0.0);
    s.g_min = number(j, ptr, "g_min", 0.0);
    s.g_max = number(j, ptr, "g_max", 1e9);
    s.g0 = number(j, ptr, "g0", std::clamp(default_g0, s.g_min, std::max(s.g_min, s.g_max)));
    return s;
}

LoadClass parse_class(const json& j, const std::string& ptr, const TimeGrid& grid, const std::filesystem::path& base) {
    allow_keys(j, ptr, {"name", "alpha", "capacity", "cost_scale", "cost_degree", "x0", "rated_gw", "baseline", "dev_min",
                        "dev_max"});
    const std::string name = text(j, ptr, "name");
    if (!j.contains("baseline")) throw ParseError(child(ptr, "baseline"), "required profile is missing");
    Trajectory baseline = parse_profile(j.at("baseline"), child(ptr, "baseline"), grid, base);
    const double alpha = number(j, ptr, "alpha");
    const double capacity = number(j, ptr, "capacity");
    const double cost_scale = number(j, ptr, "cost_scale");
    const int degree = integer(j, ptr, "cost_degree", 8);
    const double x0 = number(j, ptr, "x0", 0.0);
    const bool explicit_bounds = j.contains("dev_min") || j.contains("dev_max");
    if (!explicit_bounds && !j.contains("rated_gw"))
        throw ParseError(child(ptr, "rated_gw"), "give rated_gw or explicit dev_min/dev_max profiles");
    const double rated = number(j, ptr, "rated_gw", 0.0);

    LoadClass c{name, alpha, capacity, cost_scale, degree, baseline, baseline, baseline, x0};
    try {
        if (!explicit_bounds) return make_load_class(name, alpha, capacity, cost_scale, degree, baseline, rated, x0);
        if (!j.contains("dev_min") || !j.contains("dev_max"))
            throw ParseError(ptr, "dev_min and dev_max must be given together");
        c.dev_min = parse_profile(j.at("dev_min"), child(ptr, "dev_min"), grid, base);
        c.dev_max = parse_profile(j.at("dev_max"), child(ptr, "dev_max"), grid, base);
        c.validate();
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(ptr, e.what());
    }
    return c;
}

PopulationParams parse_population(const json& j, const std::string& ptr) {
    allow_keys(j, ptr, {"n_loads", "setpoint", "deadband", "rated_kw", "tau_hours", "heat_rate", "ambient",
                        "draws_per_day", "draw_minutes", "draw_cooling", "heterogeneity"});
    PopulationParams p;
    p.n_loads = integer(j, ptr, "n_loads", p.n_loads);
    p.setpoint = number(j, ptr, "setpoint", p.setpoint);
    p.deadband = number(j, ptr, "deadband", p.deadband);
    p.rated_kw = number(j, ptr, "rated_kw", p.rated_kw);
    p.tau_hours = number(j, ptr, "tau_hours", p.tau_hours);
    p.heat_rate = number(j, ptr, "heat_rate", p.heat_rate);
    p.ambient = number(j, ptr, "ambient", p.ambient);
    p.draws_per_day = number(j, ptr, "draws_per_day", p.draws_per_day);
    p.draw_minutes = number(j, ptr, "draw_minutes", p.draw_minutes);
    p.draw_cooling = number(j, ptr, "draw_cooling", p.draw_cooling);
    p.heterogeneity = number(j, ptr, "heterogeneity", p.heterogeneity);
    if (p.n_loads < 1) throw ParseError(child(ptr, "n_loads"), "must be >= 1");
    if (!(p.deadband > 0.0)) throw ParseError(child(ptr, "deadband"), "must be > 0");
    if (!(p.rated_kw > 0.0)) throw ParseError(child(ptr, "rated_kw"), "must be > 0");
    if (!(p.tau_hours > 0.0)) throw ParseError(child(ptr, "tau_hours"), "must be > 0");
    if (!(p.heat_rate > 0.0)) throw ParseError(child(ptr, "heat_rate"), "must be > 0");
    if (!(p.draws_per_day >= 0.0)) throw ParseError(child(ptr, "draws_per_day"), "must be >= 0");
    if (!(p.draw_minutes > 0.0)) throw ParseError(child(ptr, "draw_minutes"), "must be > 0");
    if (!(p.heterogeneity >= 0.0 && p.heterogeneity < 1.0)) throw ParseError(child(ptr, "heterogeneity"), "must be in [0, 1)");
    return p;
}

EnsembleConfig parse_ensemble(const json& j, const std::string& ptr) {
    allow_keys(j, ptr, {"population", "step_seconds", "hours", "macro_minutes", "seed", "reference_fraction",
                        "reference_csv", "reference_column", "sample_load"});
    EnsembleConfig e;
    if (j.contains("population")) e.population = parse_population(j.at("population"), child(ptr, "population"));
    e.step_seconds = number(j, ptr, "step_seconds", e.step_seconds);
    e.hours = number(j, ptr, "hours", e.hours);
    e.macro_minutes = number(j, ptr, "macro_minutes", e.macro_minutes);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ParseError(child(ptr, "seed"), "expected a non-negative integer");
        e.seed = j.at("seed").get<std::uint64_t>();
    }
    e.reference_fraction = number(j, ptr, "reference_fraction", e.reference_fraction);
    e.reference_csv = text(j, ptr, "reference_csv", "");
    e.reference_column = text(j, ptr, "reference_column", "");
    e.sample_load = integer(j, ptr, "sample_load", 0);
    if (!(e.step_seconds > 0.0)) throw ParseError(child(ptr, "step_seconds"), "must be > 0");
    if (!(e.hours > 0.0)) throw ParseError(child(ptr, "hours"), "must be > 0");
    const double micro_per_macro = e.macro_minutes * 60.0 / e.step_seconds;
    if (!(e.macro_minutes > 0.0) || std::abs(micro_per_macro - std::round(micro_per_macro)) > 1e-9 || micro_per_macro < 1.0)
        throw ParseError(child(ptr, "macro_minutes"), "must be a positive multiple of step_seconds");
    if (!(e.reference_fraction >= 0.0)) throw ParseError(child(ptr, "reference_fraction"), "must be >= 0");
    if (e.sample_load < 0 || e.sample_load >= e.population.n_loads)
        throw ParseError(child(ptr, "sample_load"), "must index a load of the population");
    return e;
}

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col > 1 ? col - 1 : 1);
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text_in, const std::filesystem::path& base_dir,
                              const ConfigOverrides& ov) {
    json doc;
    try {
        doc = json::parse(text_in);
    } catch (const json::parse_error& e) {
        throw ParseError(line_col(text_in, e.byte), "malformed JSON");
    }
    allow_keys(doc, "", {"name", "grid", "inflexible_load", "supplier", "classes", "event", "ensemble", "solver"});

    ScenarioConfig cfg{text(doc, "", "name", "scenario"),
                       Scenario{TimeGrid(24.0, 5.0), Trajectory::zeros(TimeGrid(24.0, 5.0), Unit::GW), {}, {}, std::nullopt},
                       std::nullopt, std::nullopt, std::nullopt, SolverOptions{}, base_dir};

    double horizon = 24.0, step = 5.0;
    if (doc.contains("grid")) {
        const json& g = doc.at("grid");
        allow_keys(g, "/grid", {"horizon_hours", "step_minutes"});
        horizon = number(g, "/grid", "horizon_hours", horizon);
        step = number(g, "/grid", "step_minutes", step);
    }
    if (ov.steps) {
        if (*ov.steps < 2) throw ValidationError("--steps must be >= 2");
        step = horizon * 60.0 / *ov.steps;
    }
    const TimeGrid grid = [&] {
        try {
            return TimeGrid(horizon, step);
        } catch (const ValidationError& e) {
            throw ParseError("/grid", e.what());
        }
    }();
    Scenario& sc = cfg.scenario;
    sc.grid = grid;
    sc.inflexible_load = doc.contains("inflexible_load")
                             ? parse_profile(doc.at("inflexible_load"), "/inflexible_load", grid, base_dir)
                             : Trajectory::zeros(grid, Unit::GW);

    if (doc.contains("classes")) {
        const json& cl = doc.at("classes");
        if (!cl.is_array()) throw ParseError("/classes", "expected an array");
        std::set<std::string> names;
        for (std::size_t i = 0; i < cl.size(); ++i) {
            sc.classes.push_back(parse_class(cl[i], child("/classes", i), grid, base_dir));
            if (!names.insert(sc.classes.back().name).second)
                throw ParseError(child(child("/classes", i), "name"), "duplicate class name");
        }
    }

    const double net0 = sc.inflexible_load[0] + (sc.classes.empty() ? 0.0 : sc.total_baseline()[0]);
    sc.supplier = parse_supplier(doc.contains("supplier") ? doc.at("supplier") : json::object(), "/supplier", net0);
    if (ov.ramp_cost) sc.supplier.ramp_cost = *ov.ramp_cost;
    try {
        sc.supplier.validate();
    } catch (const ValidationError& e) {
        throw ParseError("/supplier", e.what());
    }

    if (doc.contains("event")) {
        const json& e = doc.at("event");
        const std::string type = text(e, "/event", "type");
        if (type == "cpp") {
            allow_keys(e, "/event", {"type", "start_hours", "duration_minutes", "uplift_fraction", "base_price"});
            CppEvent ev;
            ev.start_hours = number(e, "/event", "start_hours", ev.start_hours);
            ev.duration_minutes = number(e, "/event", "duration_minutes", ev.duration_minutes);
            ev.uplift_fraction = number(e, "/event", "uplift_fraction", ev.uplift_fraction);
            ev.base_price = number(e, "/event", "base_price", ev.base_price);
            if (ov.uplift) ev.uplift_fraction = *ov.uplift;
            try {
                ev.validate(grid);
                event_window(grid, ev.start_hours, ev.duration_minutes);
            } catch (const ValidationError& err) {
                throw ParseError("/event", err.what());
            }
            cfg.cpp = ev;
        } else if (type == "scarcity") {
            allow_keys(e, "/event", {"type", "start_hours", "duration_minutes", "magnitude_gw"});
            ScarcityEvent ev;
            ev.start_hours = number(e, "/event", "start_hours", ev.start_hours);
            ev.duration_minutes = number(e, "/event", "duration_minutes", ev.duration_minutes);
            ev.magnitude_gw = number(e, "/event", "magnitude_gw", ev.magnitude_gw);
            if (ov.bump_gw) ev.magnitude_gw = *ov.bump_gw;
            try {
                event_window(grid, ev.start_hours, ev.duration_minutes);
            } catch (const ValidationError& err) {
                throw ParseError("/event", err.what());
            }
            if (sc.classes.empty()) throw ValidationError("scarcity event requires at least one load class");
            cfg.scarcity = ev;
        } else {
            throw ParseError("/event/type", "expected \"cpp\" or \"scarcity\"");
        }
    }

    if (doc.contains("ensemble")) {
        cfg.ensemble = parse_ensemble(doc.at("ensemble"), "/ensemble");
        if (ov.seed) cfg.ensemble->seed = *ov.seed;
        if (ov.n_loads) cfg.ensemble->population.n_loads = *ov.n_loads;
        if (!cfg.ensemble->reference_csv.empty()) {
            std::filesystem::path p = cfg.ensemble->reference_csv;
            if (p.is_relative()) p = base_dir / p;
            if (!std::filesystem::exists(p))
                throw ParseError("/ensemble/reference_csv", "file not found: " + p.string());
        }
    }

    if (doc.contains("solver")) {
        const json& s = doc.at("solver");
        allow_keys(s, "/solver", {"tol", "max_iters"});
        cfg.solver.tol = number(s, "/solver", "tol", cfg.solver.tol);
        cfg.solver.max_iters = integer(s, "/solver", "max_iters", cfg.solver.max_iters);
    }
    if (ov.tol) cfg.solver.tol = *ov.tol;
    if (!(cfg.solver.tol > 0.0)) throw ParseError("/solver/tol", "must be positive");
    if (cfg.solver.max_iters < 1) throw ParseError("/solver/max_iters", "must be positive");

    sc.validate(false);
    check_feasible(cfg.equilibrium_scenario());
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str(), path.parent_path(), overrides);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ":" + e.where(), std::string(e.what()).substr(e.where().size() + 2));
    }
}

// --- serialization ------------------------------------------------------------------

namespace {

json values_profile(const Trajectory& t) {
    return json{{"shape", "values"}, {"step_minutes", t.grid().step_minutes()}, {"values", t.vector()}};
}

}  // namespace

std::string save_scenario(const ScenarioConfig& cfg) {
    const Scenario& sc = cfg.scenario;
    json doc;
    doc["name"] = cfg.name;
    doc["grid"] = {{"horizon_hours", sc.grid.horizon_hours()}, {"step_minutes", sc.grid.step_minutes()}};
    doc["inflexible_load"] = values_profile(sc.inflexible_load);
    const SupplierModel& s = sc.supplier;
    doc["supplier"] = {{"a0", s.a0}, {"a1", s.a1}, {"a2", s.a2}, {"ramp_cost", s.ramp_cost},
                       {"g_min", s.g_min}, {"g_max", s.g_max}, {"g0", s.g0}};
    json classes = json::array();
    for (const auto& c : sc.classes) {
        classes.push_back({{"name", c.name},
                           {"alpha", c.alpha},
                           {"capacity", c.capacity},
                           {"cost_scale", c.cost_scale},
                           {"cost_degree", c.cost_degree},
                           {"x0", c.x0},
                           {"baseline", values_profile(c.baseline)},
                           {"dev_min", values_profile(c.dev_min)},
                           {"dev_max", values_profile(c.dev_max)}});
    }
    doc["classes"] = classes;
    if (cfg.cpp)
        doc["event"] = {{"type", "cpp"},
                        {"start_hours", cfg.cpp->start_hours},
                        {"duration_minutes", cfg.cpp->duration_minutes},
                        {"uplift_fraction", cfg.cpp->uplift_fraction},
                        {"base_price", cfg.cpp->base_price}};
    else if (cfg.scarcity)
        doc["event"] = {{"type", "scarcity"},
                        {"start_hours", cfg.scarcity->start_hours},
                        {"duration_minutes", cfg.scarcity->duration_minutes},
                        {"magnitude_gw", cfg.scarcity->magnitude_gw}};
    if (cfg.ensemble) {
        const EnsembleConfig& e = *cfg.ensemble;
        const PopulationParams& p = e.population;
        doc["ensemble"] = {{"population",
                            {{"n_loads", p.n_loads},
                             {"setpoint", p.setpoint},
                             {"deadband", p.deadband},
                             {"rated_kw", p.rated_kw},
                             {"tau_hours", p.tau_hours},
                             {"heat_rate", p.heat_rate},
                             {"ambient", p.ambient},
                             {"draws_per_day", p.draws_per_day},
                             {"draw_minutes", p.draw_minutes},
                             {"draw_cooling", p.draw_cooling},
                             {"heterogeneity", p.heterogeneity}}},
                           {"step_seconds", e.step_seconds},
                           {"hours", e.hours},
                           {"macro_minutes", e.macro_minutes},
                           {"seed", e.seed},
                           {"reference_fraction", e.reference_fraction},
                           {"reference_csv", e.reference_csv},
                           {"reference_column", e.reference_column},
                           {"sample_load", e.sample_load}};
    }
    doc["solver"] = {{"tol", cfg.solver.tol}, {"max_iters", cfg.solver.max_iters}};
    return doc.dump(2) + "\n";
}

void save_scenario(const ScenarioConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << save_scenario(cfg);
}

}  // namespace gridce
