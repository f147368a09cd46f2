#include "gridce/agents.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridce/parallel.hpp"
#include "gridce/scenarios.hpp"

namespace gridce {

// --- aggregator --------------------------------------------------------------

AggregatorObjective::AggregatorObjective(const LoadClass& cls, std::span<const double> price)
    : cls_(cls),
      price_(price),
      n_(cls.grid().n_steps()),
      dt_(cls.grid().dt_hours()),
      step_(soc_step(cls.alpha, cls.grid().dt_hours())),
      x_(n_),
      w_(n_),
      t_(n_),
      decay_pow_(static_cast<std::size_t>(n_) + 1) {
    if (static_cast<int>(price.size()) != n_) throw DimensionError("aggregator: price length does not match grid");
    decay_pow_[0] = 1.0;
    for (std::size_t m = 1; m < decay_pow_.size(); ++m) decay_pow_[m] = decay_pow_[m - 1] * step_.decay;
}

void AggregatorObjective::soc(const Vec& d, Vec& x) const {
    x.resize(n_);
    x(0) = cls_.x0;
    for (int k = 0; k + 1 < n_; ++k) x(k + 1) = step_.decay * x(k) + step_.gain * d(k);
}

double AggregatorObjective::value(const Vec& d) {
    soc(d, x_);
    double v = 0.0;
    for (int k = 0; k < n_; ++k) v += qos_cost(cls_, x_(k)) + price_[static_cast<std::size_t>(k)] * d(k);
    return v * dt_;
}

double AggregatorObjective::value_gradient(const Vec& d, Vec& grad) {
    const double v = value(d);
    grad.resize(n_);
    // w[j] = sum_{k>j} c'(x[k]) gain decay^(k-1-j)
    w_(n_ - 1) = 0.0;
    for (int j = n_ - 2; j >= 0; --j) w_(j) = step_.gain * qos_marginal(cls_, x_(j + 1)) + step_.decay * w_(j + 1);
    for (int j = 0; j < n_; ++j) grad(j) = dt_ * (price_[static_cast<std::size_t>(j)] + w_(j));
    return v;
}

void AggregatorObjective::hessian(const Vec& d, Mat& h) {
    soc(d, x_);
    // H[j][l] = dt decay^(l-j) T[l] for j <= l, with
    // T[l] = sum_{k>l} gain^2 c''(x[k]) decay^(2(k-1-l)).
    const double g2 = step_.gain * step_.gain;
    const double a2 = step_.decay * step_.decay;
    t_(n_ - 1) = 0.0;
    for (int l = n_ - 2; l >= 0; --l) t_(l) = g2 * qos_curvature(cls_, x_(l + 1)) + a2 * t_(l + 1);
    h.resize(n_, n_);
    for (int l = 0; l < n_; ++l) {
        const double tl = dt_ * t_(l);
        for (int j = 0; j <= l; ++j) {
            const double v = decay_pow_[static_cast<std::size_t>(l - j)] * tl;
            h(j, l) = v;
            h(l, j) = v;
        }
    }
}

Vec AggregatorObjective::lower() const {
    return Eigen::Map<const Vec>(cls_.dev_min.vector().data(), n_);
}

Vec AggregatorObjective::upper() const {
    return Eigen::Map<const Vec>(cls_.dev_max.vector().data(), n_);
}

double AggregatorObjective::grad_scale() const {
    double pmax = 0.0;
    for (double p : price_) pmax = std::max(pmax, std::abs(p));
    return dt_ * std::max({1.0, pmax, cls_.cost_scale / cls_.capacity});
}

// --- supplier ----------------------------------------------------------------

SupplierObjective::SupplierObjective(const SupplierModel& supplier, std::span<const double> price, int n, double dt)
    : sup_(supplier), price_(price), n_(n), dt_(dt) {
    if (static_cast<int>(price.size()) != n_) throw DimensionError("supplier: price length does not match grid");
}

double SupplierObjective::value(const Vec& g) {
    double v = 0.0;
    double prev = sup_.g0;
    for (int k = 0; k < n_; ++k) {
        v += sup_.gen_cost(g(k)) + sup_.ramp_penalty((g(k) - prev) / dt_) - price_[static_cast<std::size_t>(k)] * g(k);
        prev = g(k);
    }
    return v * dt_;
}

double SupplierObjective::value_gradient(const Vec& g, Vec& grad) {
    grad.resize(n_);
    const double ramp = 2.0 * sup_.ramp_cost / dt_;
    for (int k = 0; k < n_; ++k) {
        const double prev = k == 0 ? sup_.g0 : g(k - 1);
        double gk = dt_ * (sup_.gen_marginal(g(k)) - price_[static_cast<std::size_t>(k)]) + ramp * (g(k) - prev);
        if (k + 1 < n_) gk -= ramp * (g(k + 1) - g(k));
        grad(k) = gk;
    }
    return value(g);
}

void SupplierObjective::hessian(const Vec&, Mat& h) {
    const double ramp = 2.0 * sup_.ramp_cost / dt_;
    h.setZero(n_, n_);
    for (int k = 0; k < n_; ++k) {
        h(k, k) = dt_ * 2.0 * sup_.a2 + ramp * (k + 1 < n_ ? 2.0 : 1.0);
        if (k + 1 < n_) {
            h(k, k + 1) = -ramp;
            h(k + 1, k) = -ramp;
        }
    }
}

double SupplierObjective::grad_scale() const {
    double pmax = 0.0;
    for (double p : price_) pmax = std::max(pmax, std::abs(p));
    return dt_ * std::max({1.0, pmax, std::abs(sup_.gen_marginal(sup_.g0))});
}

// --- best responses ------------------------------------------------------------

namespace {

Vec start_point(const std::vector<double>* warm, int n) {
    if (warm && static_cast<int>(warm->size()) == n) return Eigen::Map<const Vec>(warm->data(), n);
    return Vec::Zero(n);
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

void require_tol(const SolverOptions& opts) {
    if (!(opts.tol > 0.0)) throw ValidationError("solver tolerance must be positive");
    if (opts.max_iters <= 0) throw ValidationError("solver iteration cap must be positive");
}

}  // namespace

BestResponse aggregator_best_response(const LoadClass& cls, const Trajectory& price, const SolverOptions& opts,
                                      const std::vector<double>* warm_start) {
    require_tol(opts);
    cls.validate();
    require_on_grid(price, cls.grid(), Unit::PricePerMWh, "aggregator price");
    const int n = cls.grid().n_steps();

    AggregatorObjective f(cls, price.values());
    const Vec lo = f.lower();
    const Vec hi = f.upper();
    BoxNewtonOptions bo{opts.tol, f.grad_scale(), opts.max_iters};
    BoxNewtonResult r = minimize_box(f, lo, hi, start_point(warm_start, n), bo);

    // The last deviation never reaches a costed state, so the problem is
    // linear in it: dev_min when priced, dev_max when paid, 0 when free.
    const double p_last = price[n - 1];
    r.z(n - 1) = p_last > 0.0 ? lo(n - 1) : (p_last < 0.0 ? hi(n - 1) : 0.0);

    Vec grad(n);
    const double value = f.value_gradient(r.z, grad);
    const double residual = projected_gradient_residual(r.z, grad, lo, hi) / bo.grad_scale;
    if (!(residual <= opts.tol)) {
        std::ostringstream os;
        os << "aggregator '" << cls.name << "': no convergence after " << r.iters << " iterations (residual "
           << residual << ")";
        throw SolverError(os.str(), to_std(r.z), residual);
    }
    return BestResponse{Trajectory(cls.grid(), to_std(r.z), Unit::GW), -value, r.iters, residual};
}

BestResponse supplier_best_response(const SupplierModel& supplier, const Trajectory& price,
                                    const SolverOptions& opts, const std::vector<double>* warm_start) {
    require_tol(opts);
    supplier.validate();
    if (price.unit() != Unit::PricePerMWh) throw DimensionError("supplier price must be in currency/MWh");
    const int n = price.size();
    SupplierObjective f(supplier, price.values(), n, price.grid().dt_hours());
    BoxNewtonOptions bo{opts.tol, f.grad_scale(), opts.max_iters};
    Vec start = warm_start ? start_point(warm_start, n) : Vec::Constant(n, supplier.g0);
    BoxNewtonResult r = minimize_box(f, f.lower(), f.upper(), start, bo);
    if (!r.converged) {
        std::ostringstream os;
        os << "supplier: no convergence after " << r.iters << " iterations (residual " << r.residual << ")";
        throw SolverError(os.str(), to_std(r.z), r.residual);
    }
    return BestResponse{Trajectory(price.grid(), to_std(r.z), Unit::GW), -r.value, r.iters, r.residual};
}

double aggregator_objective(const LoadClass& cls, const Trajectory& price, const Trajectory& dev) {
    require_on_grid(dev, cls.grid(), Unit::GW, "aggregator deviation");
    require_on_grid(price, cls.grid(), Unit::PricePerMWh, "aggregator price");
    AggregatorObjective f(cls, price.values());
    return -f.value(Eigen::Map<const Vec>(dev.vector().data(), dev.size()));
}

std::vector<double> aggregator_gradient(const LoadClass& cls, const Trajectory& price, const Trajectory& dev) {
    require_on_grid(dev, cls.grid(), Unit::GW, "aggregator deviation");
    require_on_grid(price, cls.grid(), Unit::PricePerMWh, "aggregator price");
    AggregatorObjective f(cls, price.values());
    Vec g;
    f.value_gradient(Eigen::Map<const Vec>(dev.vector().data(), dev.size()), g);
    return to_std(-g);
}

double supplier_objective(const SupplierModel& supplier, const Trajectory& price, const Trajectory& gen) {
    require_on_grid(gen, price.grid(), Unit::GW, "supplier generation");
    SupplierObjective f(supplier, price.values(), gen.size(), gen.grid().dt_hours());
    return -f.value(Eigen::Map<const Vec>(gen.vector().data(), gen.size()));
}

std::vector<double> supplier_gradient(const SupplierModel& supplier, const Trajectory& price, const Trajectory& gen) {
    require_on_grid(gen, price.grid(), Unit::GW, "supplier generation");
    SupplierObjective f(supplier, price.values(), gen.size(), gen.grid().dt_hours());
    Vec g;
    f.value_gradient(Eigen::Map<const Vec>(gen.vector().data(), gen.size()), g);
    return to_std(-g);
}

// --- CPP experiment ------------------------------------------------------------

void CppEvent::validate(const TimeGrid& grid) const {
    if (!(duration_minutes > 0.0)) throw ValidationError("cpp event: duration must be positive");
    if (!(uplift_fraction >= 0.0)) throw ValidationError("cpp event: uplift must be >= 0");
    if (!(start_hours >= 0.0) || start_hours + duration_minutes / 60.0 > grid.horizon_hours() + 1e-9)
        throw ValidationError("cpp event: event must lie inside the horizon");
    if (!std::isfinite(base_price)) throw ValidationError("cpp event: base price must be finite");
}

CppReport run_cpp_experiment(const Scenario& scenario, const CppEvent& event, const SolverOptions& opts,
                             int threads) {
    scenario.validate(true);
    event.validate(scenario.grid);
    const TimeGrid& grid = scenario.grid;
    const int n = grid.n_steps();

    Trajectory price = build_cpp_price(grid, event);
    std::vector<double> sig(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) sig[static_cast<std::size_t>(k)] = price[k] - event.base_price;
    Trajectory signal(grid, std::move(sig), Unit::PricePerMWh);

    const auto [start, steps] = event_window(grid, event.start_hours, event.duration_minutes);

    std::vector<ClassCppResponse> out;
    out.reserve(scenario.classes.size());
    for (const auto& c : scenario.classes)
        out.push_back(ClassCppResponse{c.name, std::nullopt, {}, c.baseline, integrate_soc(c, Trajectory::zeros(grid, Unit::GW)), 0.0});

    parallel_for(static_cast<int>(scenario.classes.size()), threads, [&](int i) {
        const LoadClass& c = scenario.classes[static_cast<std::size_t>(i)];
        ClassCppResponse& r = out[static_cast<std::size_t>(i)];
        try {
            r.response = aggregator_best_response(c, signal, opts);
            r.power = c.baseline + r.response->profile;
            r.soc = integrate_soc(c, r.response->profile);
        } catch (const SolverError& e) {
            r.error = e.what();
            std::vector<double> p(c.baseline.vector());
            const auto& best = e.best_iterate();
            for (int k = 0; k < n && k < static_cast<int>(best.size()); ++k) p[static_cast<std::size_t>(k)] += best[static_cast<std::size_t>(k)];
            r.power = Trajectory(grid, std::move(p), Unit::GW);
        }
        // Full turn-off: consumption below 2% of baseline.
        int off = 0;
        for (int k = start; k < n && r.power[k] <= 0.02 * c.baseline[k] + 1e-9 && c.baseline[k] > 0.0; ++k) ++off;
        r.off_minutes = off * grid.step_minutes();
    });

    CppReport rep{price, signal, {}, Trajectory::zeros(grid, Unit::GW), scenario.total_baseline(), start, steps};
    std::vector<double> total(static_cast<std::size_t>(n), 0.0);
    for (const auto& r : out) {
        if (!r.response) rep.all_converged = false;
        for (int k = 0; k < n; ++k) total[static_cast<std::size_t>(k)] += r.power[k];
    }
    rep.classes = std::move(out);
    rep.total_power = Trajectory(grid, std::move(total), Unit::GW);

    for (int k = 0; k < start; ++k)
        rep.pre_bound_surge = std::max(rep.pre_bound_surge, rep.total_power[k] - rep.total_baseline[k]);
    auto deviation = [&](int k) { return rep.total_power[k] - rep.total_baseline[k]; };
    if (start > 0) rep.onset_drop = deviation(start - 1) - deviation(start);
    rep.baseline_at_start = rep.total_baseline[start];
    rep.turnoff_depth = 0.0 - deviation(start);
    return rep;
}

}  // namespace gridce
