#include "gridce/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridce {

std::string_view to_string(Unit u) {
    switch (u) {
        case Unit::GW: return "GW";
        case Unit::SoC: return "SoC";
        case Unit::PricePerMWh: return "currency/MWh";
        case Unit::Dimensionless: return "dimensionless";
    }
    return "?";
}

TimeGrid::TimeGrid(double horizon_hours, double step_minutes)
    : horizon_hours_(horizon_hours), step_minutes_(step_minutes), n_steps_(0) {
    if (!(step_minutes > 0.0) || !std::isfinite(step_minutes))
        throw ValidationError("time grid: step must be positive");
    if (!(horizon_hours > 0.0) || !std::isfinite(horizon_hours))
        throw ValidationError("time grid: horizon must be positive");
    const double ratio = horizon_hours * 60.0 / step_minutes;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw ValidationError("time grid: step does not divide horizon");
    if (n < 2) throw ValidationError("time grid: need at least two steps");
    n_steps_ = static_cast<int>(n);
}

int TimeGrid::index_at(double hours) const noexcept {
    const int k = static_cast<int>(std::floor(hours / dt_hours() + 1e-9));
    return std::clamp(k, 0, n_steps_ - 1);
}

Trajectory::Trajectory(TimeGrid grid, std::vector<double> values, Unit unit)
    : grid_(grid), values_(std::move(values)), unit_(unit) {
    if (static_cast<int>(values_.size()) != grid_.n_steps()) {
        std::ostringstream os;
        os << "trajectory has " << values_.size() << " samples, grid has " << grid_.n_steps();
        throw DimensionError(os.str());
    }
    for (std::size_t k = 0; k < values_.size(); ++k)
        if (!std::isfinite(values_[k])) {
            std::ostringstream os;
            os << "trajectory sample " << k << " is not finite";
            throw ValidationError(os.str());
        }
}

Trajectory Trajectory::constant(const TimeGrid& grid, double value, Unit unit) {
    return Trajectory(grid, std::vector<double>(static_cast<std::size_t>(grid.n_steps()), value), unit);
}

double Trajectory::max() const { return *std::max_element(values_.begin(), values_.end()); }
double Trajectory::min() const { return *std::min_element(values_.begin(), values_.end()); }

void require_on_grid(const Trajectory& t, const TimeGrid& grid, Unit unit, std::string_view what) {
    if (!(t.grid() == grid)) {
        std::ostringstream os;
        os << what << ": trajectory grid (" << t.grid().n_steps() << " x " << t.grid().step_minutes()
           << " min) does not match (" << grid.n_steps() << " x " << grid.step_minutes() << " min)";
        throw DimensionError(os.str());
    }
    if (t.unit() != unit) {
        std::ostringstream os;
        os << what << ": expected unit " << to_string(unit) << ", got " << to_string(t.unit());
        throw DimensionError(os.str());
    }
}

namespace {
Trajectory combine(const Trajectory& a, const Trajectory& b, double sign) {
    require_on_grid(b, a.grid(), a.unit(), "trajectory arithmetic");
    std::vector<double> v(a.vector());
    for (int k = 0; k < a.size(); ++k) v[static_cast<std::size_t>(k)] += sign * b[k];
    return Trajectory(a.grid(), std::move(v), a.unit());
}
}  // namespace

Trajectory operator+(const Trajectory& a, const Trajectory& b) { return combine(a, b, 1.0); }
Trajectory operator-(const Trajectory& a, const Trajectory& b) { return combine(a, b, -1.0); }

void LoadClass::validate() const {
    const std::string who = "load class '" + name + "'";
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError(who + ": alpha must be >= 0");
    if (!(capacity > 0.0) || !std::isfinite(capacity)) throw ValidationError(who + ": capacity must be > 0");
    if (!(cost_scale >= 0.0) || !std::isfinite(cost_scale))
        throw ValidationError(who + ": cost_scale must be >= 0");
    if (cost_degree < 2 || cost_degree % 2 != 0)
        throw ValidationError(who + ": cost_degree must be even and >= 2");
    if (!std::isfinite(x0)) throw ValidationError(who + ": x0 must be finite");
    require_on_grid(baseline, grid(), Unit::GW, who + " baseline");
    require_on_grid(dev_min, grid(), Unit::GW, who + " dev_min");
    require_on_grid(dev_max, grid(), Unit::GW, who + " dev_max");
    for (int k = 0; k < baseline.size(); ++k) {
        if (baseline[k] < 0.0)
            throw ValidationError(who + ": baseline negative at step " + std::to_string(k));
        if (dev_min[k] > 0.0 || dev_max[k] < 0.0)
            throw ValidationError(who + ": need dev_min <= 0 <= dev_max at step " + std::to_string(k));
        if (dev_min[k] < -baseline[k] - 1e-12)
            throw ValidationError(who + ": dev_min below -baseline at step " + std::to_string(k));
    }
}

LoadClass make_load_class(std::string name, double alpha, double capacity, double cost_scale,
                          int cost_degree, Trajectory baseline, double rated_gw, double x0) {
    const TimeGrid grid = baseline.grid();
    std::vector<double> lo(static_cast<std::size_t>(grid.n_steps()));
    std::vector<double> hi(lo.size());
    for (int k = 0; k < grid.n_steps(); ++k) {
        lo[static_cast<std::size_t>(k)] = -baseline[k];
        hi[static_cast<std::size_t>(k)] = std::max(0.0, rated_gw - baseline[k]);
    }
    LoadClass c{std::move(name),
                alpha,
                capacity,
                cost_scale,
                cost_degree,
                std::move(baseline),
                Trajectory(grid, std::move(lo), Unit::GW),
                Trajectory(grid, std::move(hi), Unit::GW),
                x0};
    c.validate();
    return c;
}

void SupplierModel::validate() const {
    for (double v : {a0, a1, a2, ramp_cost, g_min, g_max, g0})
        if (!std::isfinite(v)) throw ValidationError("supplier: coefficients must be finite");
    if (a2 < 0.0) throw ValidationError("supplier: a2 must be >= 0 (convex generation cost)");
    if (ramp_cost < 0.0) throw ValidationError("supplier: ramp cost must be >= 0");
    if (!(g_min <= g0 && g0 <= g_max)) throw ValidationError("supplier: need g_min <= g0 <= g_max");
}

namespace {
Trajectory sum_over_classes(const Scenario& s, const Trajectory LoadClass::*member) {
    std::vector<double> v(static_cast<std::size_t>(s.grid.n_steps()), 0.0);
    for (const auto& c : s.classes)
        for (int k = 0; k < s.grid.n_steps(); ++k) v[static_cast<std::size_t>(k)] += (c.*member)[k];
    return Trajectory(s.grid, std::move(v), Unit::GW);
}
}  // namespace

Trajectory Scenario::total_baseline() const { return sum_over_classes(*this, &LoadClass::baseline); }
Trajectory Scenario::total_dev_min() const { return sum_over_classes(*this, &LoadClass::dev_min); }
Trajectory Scenario::total_dev_max() const { return sum_over_classes(*this, &LoadClass::dev_max); }

double Scenario::power_scale() const {
    const Trajectory net = inflexible_load + total_baseline();
    return std::max({1.0, std::abs(net.max()), std::abs(net.min())});
}

void Scenario::validate(bool require_classes) const {
    require_on_grid(inflexible_load, grid, Unit::GW, "inflexible_load");
    if (require_classes && classes.empty())
        throw ValidationError("scenario: at least one load class is required");
    for (const auto& c : classes) {
        if (!(c.grid() == grid)) throw DimensionError("load class '" + c.name + "' is not on the scenario grid");
        c.validate();
    }
    supplier.validate();
    if (exogenous_price) require_on_grid(*exogenous_price, grid, Unit::PricePerMWh, "exogenous_price");
}

SocStep soc_step(double alpha, double dt) {
    if (alpha == 0.0) return {1.0, dt};
    const double decay = std::exp(-alpha * dt);
    // -expm1 keeps the gain accurate for alpha * dt << 1.
    return {decay, -std::expm1(-alpha * dt) / alpha};
}

Trajectory integrate_soc(const LoadClass& cls, const Trajectory& dev) {
    require_on_grid(dev, cls.grid(), Unit::GW, "integrate_soc deviation");
    if (!(cls.alpha >= 0.0)) throw ValidationError("integrate_soc: alpha must be >= 0");
    const auto [decay, gain] = soc_step(cls.alpha, dev.grid().dt_hours());
    std::vector<double> x(static_cast<std::size_t>(dev.size()));
    x[0] = cls.x0;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) x[k + 1] = decay * x[k] + gain * dev[static_cast<int>(k)];
    return Trajectory(dev.grid(), std::move(x), Unit::SoC);
}

double qos_cost(const LoadClass& cls, double x) {
    const double r = x / cls.capacity;
    return cls.cost_scale * std::pow(r, cls.cost_degree);
}

double qos_marginal(const LoadClass& cls, double x) {
    const double r = x / cls.capacity;
    return cls.cost_scale * cls.cost_degree * std::pow(r, cls.cost_degree - 1) / cls.capacity;
}

double qos_curvature(const LoadClass& cls, double x) {
    const double r = x / cls.capacity;
    const int n = cls.cost_degree;
    return cls.cost_scale * n * (n - 1) * std::pow(r, n - 2) / (cls.capacity * cls.capacity);
}

double eval_demand_utility(std::span<const LoadClass> classes, std::span<const Trajectory> devs) {
    if (classes.size() != devs.size())
        throw DimensionError("eval_demand_utility: one deviation trajectory per class required");
    double total = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const Trajectory x = integrate_soc(classes[i], devs[i]);
        const double dt = x.grid().dt_hours();
        for (int k = 0; k < x.size(); ++k) total += qos_cost(classes[i], x[k]) * dt;
    }
    return -total;
}

double eval_supplier_utility(const SupplierModel& supplier, const Trajectory& gen) {
    if (gen.unit() != Unit::GW) throw DimensionError("eval_supplier_utility: generation must be in GW");
    const double dt = gen.grid().dt_hours();
    const double slack = 1e-9 * std::max(1.0, std::abs(supplier.g_max));
    double total = 0.0;
    double prev = supplier.g0;
    for (int k = 0; k < gen.size(); ++k) {
        if (gen[k] < supplier.g_min - slack || gen[k] > supplier.g_max + slack)
            throw ValidationError("eval_supplier_utility: generation outside [g_min, g_max] at step " +
                                  std::to_string(k));
        total += (supplier.gen_cost(gen[k]) + supplier.ramp_penalty((gen[k] - prev) / dt)) * dt;
        prev = gen[k];
    }
    return -total;
}

}  // namespace gridce
