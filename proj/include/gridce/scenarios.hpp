#pragma once

// Scenario construction and the JSON configuration format.
//
// A config holds a grid, an inflexible (nominal) load profile, the supplier,
// the load classes, an optional event (cpp or scarcity), an optional ensemble
// section and solver settings. Profiles are either analytic diurnal shapes or
// explicit samples (inline or from CSV) that are resampled to the grid by
// interval averaging of the zero-order hold. Relative paths are resolved
// against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridce/agents.hpp"
#include "gridce/ensemble.hpp"
#include "gridce/model.hpp"

namespace gridce {

// First step and number of steps of [start, start + duration) on the grid.
// Throws ValidationError if the window is empty or leaves the horizon.
std::pair<int, int> event_window(const TimeGrid& grid, double start_hours, double duration_minutes);

// base_price off-event, base_price * (1 + uplift) on-event.
Trajectory build_cpp_price(const TimeGrid& grid, const CppEvent& event);

struct ScarcityEvent {
    double start_hours = 17.0;
    double duration_minutes = 90.0;
    double magnitude_gw = 40.0;

    friend bool operator==(const ScarcityEvent&, const ScarcityEvent&) = default;
};

// nominal plus a rectangular bump of bump_gw over the event window.
Trajectory build_scarcity_netload(const TimeGrid& grid, const Trajectory& nominal, double bump_gw,
                                  double start_hours, double duration_minutes);

// Interval averages over the grid of a piecewise-constant signal that takes
// values[i] on [hours[i], hours[i+1]); the last sample is held to the end.
std::vector<double> resample_hold(const TimeGrid& grid, std::span<const double> hours, std::span<const double> values);

struct EnsembleConfig {
    PopulationParams population;
    double step_seconds = 10.0;
    double hours = 24.0;
    double macro_minutes = 5.0;
    std::uint64_t seed = 1;
    double reference_fraction = 0.3;     // peak reference / nominal ensemble power
    std::string reference_csv;           // empty: synthetic surrogate
    std::string reference_column;        // default: first value column
    int sample_load = 0;

    friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;
};

struct ScenarioConfig {
    std::string name;
    Scenario scenario;                   // nominal: no event applied
    std::optional<CppEvent> cpp;
    std::optional<ScarcityEvent> scarcity;
    std::optional<EnsembleConfig> ensemble;
    SolverOptions solver;
    std::filesystem::path base_dir;

    // Scenario with the CPP price attached (requires a cpp event).
    Scenario cpp_scenario() const;
    // Scenario with the scarcity bump added to the inflexible load (no bump
    // when there is no scarcity event).
    Scenario equilibrium_scenario() const;
};

// Flags that take precedence over config keys.
struct ConfigOverrides {
    std::optional<int> steps;
    std::optional<double> uplift;
    std::optional<double> bump_gw;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<double> ramp_cost;
    std::optional<int> n_loads;
};

// Throws ParseError (line:col for syntax, JSON pointer for fields),
// ValidationError / DimensionError for invalid values and InfeasibleError if
// the scarcity scenario cannot be balanced within the supplier bounds.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {},
                              const ConfigOverrides& overrides = {});
ScenarioConfig load_scenario(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Serializes every trajectory as explicit per-step values, so that
// parse_scenario(save_scenario(c)) reproduces c.
std::string save_scenario(const ScenarioConfig& config);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

// Time indices where inflexible + baseline + sum(dev_min) > g_max or
// inflexible + baseline + sum(dev_max) < g_min.
std::vector<int> infeasible_indices(const Scenario& scenario);
void check_feasible(const Scenario& scenario);

}  // namespace gridce
