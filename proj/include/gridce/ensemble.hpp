#pragma once

// Micro-level population of thermostatically controlled water heaters.
//
// Each load follows a first-order thermal model integrated with explicit Euler
// steps; hot-water draws are an on/off Markov process per load. Randomness is
// counter-based (seed, load, step, stream), so results do not depend on the
// number of worker threads.
//
// Normalized state of charge of load i is (T_i - setpoint_i) / deadband_i; its
// input is heat_rate_i * (on_i - nominal_duty_i) / deadband_i. Averaged over
// the population these obey dx/dt = -x / tau + u up to draw noise.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridce/model.hpp"

namespace gridce {

struct ThermostaticLoad {
    double temp = 50.0;            // degC
    double setpoint = 50.0;        // degC
    double deadband = 5.0;         // degC, full width
    bool on = false;
    double rated_kw = 4.5;
    double tau_hours = 24.0;       // thermal time constant
    double heat_rate = 45.0;       // degC/h while heating
    double ambient = 20.0;         // degC
    double draw_prob = 0.0;        // per-step probability that a draw starts
    double draw_cooling = 20.0;    // degC/h while a draw is active
    int draw_steps = 36;           // length of one draw, in steps
    int draw_left = 0;             // remaining steps of the active draw

    double lower() const noexcept { return setpoint - 0.5 * deadband; }
    double upper() const noexcept { return setpoint + 0.5 * deadband; }
    // Expected draw cooling rate in steady state, degC/h.
    double mean_draw_rate() const noexcept;
    // Duty cycle that balances standby and draw losses at the setpoint.
    double nominal_duty() const noexcept;
};

struct PopulationParams {
    int n_loads = 100000;
    double setpoint = 50.0;
    double deadband = 5.0;
    double rated_kw = 4.5;
    double tau_hours = 24.0;
    double heat_rate = 45.0;
    double ambient = 20.0;
    double draws_per_day = 4.0;
    double draw_minutes = 6.0;
    double draw_cooling = 20.0;
    double heterogeneity = 0.2;    // log-normal spread of tau, rated power, heat rate

    friend bool operator==(const PopulationParams&, const PopulationParams&) = default;
};

struct EnsembleState {
    std::vector<ThermostaticLoad> loads;
    double step_seconds = 10.0;
    std::uint64_t rng_seed = 0;
    std::int64_t step_index = 0;

    double dt_hours() const noexcept { return step_seconds / 3600.0; }
    double power_kw() const noexcept;
    double nominal_power_kw() const noexcept;
    double mean_soc() const noexcept;        // mean normalized temperature deviation
    double mean_input() const noexcept;      // mean normalized heating input, 1/h
};

// Draws a population in its stationary regime: temperatures uniform in the
// deadband, heating with probability equal to the nominal duty cycle, draws in
// their stationary phase.
EnsembleState make_population(const PopulationParams& params, double step_seconds, std::uint64_t seed);

struct StepOutput {
    double power_kw = 0.0;     // consumption during the step
    double input = 0.0;        // mean normalized input during the step, 1/h
    bool saturated = false;
    double max_excursion = 0.0;  // largest distance outside a deadband after the step, degC
    long violations = 0;       // loads outside their band by more than one step of drift
};

// Pure hysteresis: heat until the upper edge, idle until the lower edge.
StepOutput step_baseline(EnsembleState& state, int threads = 1);

struct TrackingOptions {
    double p_max = 0.2;        // cap on the per-step switching probability
};

// Randomized switching toward baseline_kw + reference_kw. Loads strictly
// inside their deadband switch with probability proportional to the aggregate
// error; thermostat limits always override. `saturated` is set when the
// target lies outside what every eligible load switching could reach.
StepOutput step_tracking(EnsembleState& state, double baseline_kw, double reference_kw,
                         const TrackingOptions& opts = {}, int threads = 1);

// Per-macro-step record of a simulation.
struct EnsembleRecord {
    TimeGrid grid;                       // macro grid
    std::vector<double> power_kw;        // mean over each macro step
    std::vector<double> baseline_kw;     // tracking baseline (mean over step)
    std::vector<double> reference_kw;    // requested deviation (mean over step)
    std::vector<double> soc;             // normalized SoC at each macro sample start
    std::vector<double> input;           // mean normalized input over each macro step
    std::vector<double> sample_temp;     // one load's temperature, every micro step
    std::vector<double> sample_power_kw; // its consumption, every micro step
    std::vector<double> micro_power_kw;  // aggregate consumption, every micro step
    std::vector<double> micro_error_kw;  // tracking error per micro step (empty for baseline)
    std::vector<double> micro_reference_kw;
    double nrmse = 0.0;                  // RMS tracking error / reference range
    long deadband_violations = 0;        // excursions beyond the band plus one step of drift
    long saturated_steps = 0;
    double max_excursion = 0.0;          // largest distance outside the band, degC
};

struct SimulationSpec {
    double hours = 24.0;
    double macro_minutes = 5.0;
    int sample_load = 0;
    // Micro-step signals; when `reference_kw` is empty the run is baseline.
    std::vector<double> baseline_kw;
    std::vector<double> reference_kw;
    TrackingOptions tracking;
    int threads = 1;
};

// Advances `state` in place for spec.hours and records the run.
EnsembleRecord simulate(EnsembleState& state, const SimulationSpec& spec);

// Band-limited zero-mean surrogate of a balancing-reserve signal: a sum of
// sinusoids with periods between 10 min and 3 h, scaled to peak `amplitude`.
std::vector<double> synthetic_reference(int n_micro_steps, double step_seconds, double amplitude, std::uint64_t seed);

// Resamples a reference (hours, MW) onto the micro grid by zero-order hold and
// scales it to kW with peak |value| = amplitude_kw.
std::vector<double> reference_from_series(std::span<const double> hours, std::span<const double> mw,
                                          int n_micro_steps, double step_seconds, double amplitude_kw);

struct LeakageFit {
    double alpha = 0.0;   // 1/h
    double gain = 1.0;
    double r2 = 0.0;      // of the free-run model trajectory against the data
};

// Least squares for x[k+1] = a x[k] + b u[k]; alpha = -ln(a)/dt. Throws
// ValidationError if the input is constant (alpha not identifiable).
LeakageFit fit_leakage(std::span<const double> soc, std::span<const double> input, double dt_hours);

// Runs a probe (square wave of +/- probe_fraction of nominal power, period
// `probe_period_hours`) through step_tracking on a copy of `state` and fits
// the first-order model to the recorded mean SoC.
LeakageFit fit_leakage(const EnsembleState& state, double probe_fraction, double probe_period_hours,
                       double hours, double macro_minutes, int threads = 1);

struct MeanFieldReport {
    double rms = 0.0;     // in deadband widths
    double max = 0.0;
    std::vector<double> model_soc;
};

// Compares the recorded mean SoC with the aggregate model driven by the
// recorded input: x[k+1] = e^{-alpha dt} x[k] + (1 - e^{-alpha dt})/alpha u[k].
MeanFieldReport mean_field_check(const EnsembleRecord& record, double alpha);

}  // namespace gridce
