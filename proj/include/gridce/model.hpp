#pragma once

// Domain types for the aggregate flexibility model.
//
// Units used throughout the library:
//   power            GW
//   state of charge  GWh (energy displaced relative to baseline)
//   price            currency/MWh
//   cost, utility    thousands of currency (k$); cost rates in k$/h
// With these choices price[$/MWh] * power[GW] * time[h] is already in k$, so
// no conversion factors appear in the objectives.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridce/error.hpp"

namespace gridce {

enum class Unit { GW, SoC, PricePerMWh, Dimensionless };

std::string_view to_string(Unit u);

// Uniform grid on [0, horizon). Sample k covers [k*dt, (k+1)*dt).
class TimeGrid {
public:
    // Throws ValidationError unless step > 0, step divides horizon and there
    // are at least two steps.
    TimeGrid(double horizon_hours, double step_minutes);

    double horizon_hours() const noexcept { return horizon_hours_; }
    double step_minutes() const noexcept { return step_minutes_; }
    double dt_hours() const noexcept { return step_minutes_ / 60.0; }
    int n_steps() const noexcept { return n_steps_; }
    double time_hours(int k) const noexcept { return k * dt_hours(); }

    // Index of the sample containing time t (clamped to the grid).
    int index_at(double hours) const noexcept;

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.n_steps_ == b.n_steps_ && a.step_minutes_ == b.step_minutes_;
    }

private:
    double horizon_hours_;
    double step_minutes_;
    int n_steps_;
};

class Trajectory {
public:
    // Throws DimensionError on a length mismatch, ValidationError on
    // non-finite samples.
    Trajectory(TimeGrid grid, std::vector<double> values, Unit unit);

    static Trajectory constant(const TimeGrid& grid, double value, Unit unit);
    static Trajectory zeros(const TimeGrid& grid, Unit unit) { return constant(grid, 0.0, unit); }

    const TimeGrid& grid() const noexcept { return grid_; }
    Unit unit() const noexcept { return unit_; }
    int size() const noexcept { return static_cast<int>(values_.size()); }
    double operator[](int k) const noexcept { return values_[static_cast<std::size_t>(k)]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    double max() const;
    double min() const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    TimeGrid grid_;
    std::vector<double> values_;
    Unit unit_;
};

// Throws DimensionError if the trajectory is not on `grid` or has the wrong
// unit. `what` names the argument in the message.
void require_on_grid(const Trajectory& t, const TimeGrid& grid, Unit unit, std::string_view what);

Trajectory operator+(const Trajectory& a, const Trajectory& b);
Trajectory operator-(const Trajectory& a, const Trajectory& b);

// One aggregated population of flexible loads behaving as a leaky battery:
// dx/dt = -alpha x + d, with QoS cost kappa (x/C)^(2p).
struct LoadClass {
    std::string name;
    double alpha = 0.0;        // 1/h
    double capacity = 1.0;     // GWh
    double cost_scale = 1.0;   // k$/h at |x| = capacity
    int cost_degree = 8;       // even, >= 2
    Trajectory baseline;       // GW
    Trajectory dev_min;        // GW, <= 0 and >= -baseline
    Trajectory dev_max;        // GW, >= 0
    double x0 = 0.0;           // GWh

    const TimeGrid& grid() const noexcept { return baseline.grid(); }

    // Throws ValidationError / DimensionError naming the offending field.
    void validate() const;

    friend bool operator==(const LoadClass&, const LoadClass&) = default;
};

// Builds a class with the default bounds: turn-off only below baseline and
// up to `rated_gw` above zero consumption.
LoadClass make_load_class(std::string name, double alpha, double capacity, double cost_scale,
                          int cost_degree, Trajectory baseline, double rated_gw, double x0 = 0.0);

struct SupplierModel {
    // c_g(g) = a0 + a1 g + a2 g^2  [k$/h]
    double a0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    // c_d(r) = ramp_cost * r^2 with r in GW/h  [k$/h]
    double ramp_cost = 0.0;
    double g_min = 0.0;
    double g_max = 1e9;
    double g0 = 0.0;

    double gen_cost(double g) const noexcept { return a0 + (a1 + a2 * g) * g; }
    double gen_marginal(double g) const noexcept { return a1 + 2.0 * a2 * g; }
    double ramp_penalty(double rate) const noexcept { return ramp_cost * rate * rate; }

    void validate() const;

    friend bool operator==(const SupplierModel&, const SupplierModel&) = default;
};

struct Scenario {
    TimeGrid grid;
    Trajectory inflexible_load;                 // GW
    std::vector<LoadClass> classes;
    SupplierModel supplier;
    std::optional<Trajectory> exogenous_price;  // CPP mode only

    Trajectory total_baseline() const;          // sum of class baselines, GW
    Trajectory total_dev_min() const;
    Trajectory total_dev_max() const;
    // Largest |inflexible + baseline| over the horizon; used to scale
    // balance tolerances.
    double power_scale() const;

    // Checks shared grids and per-class invariants. `require_classes` enforces
    // M >= 1 (equilibrium mode).
    void validate(bool require_classes) const;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

// --- load-class dynamics and costs -----------------------------------------

// Exact discretization for piecewise-constant deviation:
//   x[k+1] = e^{-alpha dt} x[k] + (1 - e^{-alpha dt})/alpha * dev[k]
// (dt * dev[k] when alpha = 0), x[0] = x0. Positive deviation charges.
Trajectory integrate_soc(const LoadClass& cls, const Trajectory& dev);

// Coefficients of the one-step recursion x+ = decay * x + gain * d.
struct SocStep {
    double decay;
    double gain;
};
SocStep soc_step(double alpha, double dt_hours);

// kappa * (x / C)^(2p): even, convex, zero at the origin, kappa at |x| = C.
double qos_cost(const LoadClass& cls, double x);
double qos_marginal(const LoadClass& cls, double x);
double qos_curvature(const LoadClass& cls, double x);

// -sum_i sum_k qos_cost(class_i, x_i[k]) dt (left Riemann sum).
double eval_demand_utility(std::span<const LoadClass> classes, std::span<const Trajectory> devs);

// -sum_k [c_g(g[k]) + c_d((g[k] - g[k-1]) / dt)] dt with g[-1] = g0.
double eval_supplier_utility(const SupplierModel& supplier, const Trajectory& gen);

}  // namespace gridce
