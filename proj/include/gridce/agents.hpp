#pragma once

// Price-taking best responses of the load-class aggregators and the supplier,
// and the critical-peak-pricing (CPP) response experiment.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridce/box_newton.hpp"
#include "gridce/model.hpp"

namespace gridce {

struct SolverOptions {
    double tol = 1e-6;       // scaled KKT residual
    int max_iters = 50000;

    friend bool operator==(const SolverOptions&, const SolverOptions&) = default;
};

struct BestResponse {
    Trajectory profile;      // deviation d* (aggregator) or generation g* (supplier), GW
    double objective = 0.0;  // achieved value of the maximized objective, k$
    int solver_iters = 0;
    double kkt_residual = 0.0;
};

// Minimization form of the aggregator problem over deviations:
//   sum_k [qos_cost(x[k]) + price[k] d[k]] dt,   x = integrate_soc(d).
// The SoC recursion is substituted in, so gradients and Hessians come from
// backward (adjoint) recursions in O(N) and O(N^2).
class AggregatorObjective final : public DenseBoxObjective {
public:
    AggregatorObjective(const LoadClass& cls, std::span<const double> price);

    int size() const override { return n_; }
    double value(const Vec& d) override;
    double value_gradient(const Vec& d, Vec& grad) override;
    void hessian(const Vec& d, Mat& h) override;

    void soc(const Vec& d, Vec& x) const;
    Vec lower() const;
    Vec upper() const;
    // Gradient magnitude used to normalize the KKT residual.
    double grad_scale() const;

private:
    const LoadClass& cls_;
    std::span<const double> price_;
    int n_;
    double dt_;
    SocStep step_;
    Vec x_, w_, t_;
    std::vector<double> decay_pow_;
};

// Minimization form of the supplier problem:
//   sum_k [c_g(g[k]) + c_d((g[k] - g[k-1]) / dt) - price[k] g[k]] dt.
// Quadratic with a tridiagonal Hessian.
class SupplierObjective final : public DenseBoxObjective {
public:
    SupplierObjective(const SupplierModel& supplier, std::span<const double> price, int n, double dt);

    int size() const override { return n_; }
    double value(const Vec& g) override;
    double value_gradient(const Vec& g, Vec& grad) override;
    void hessian(const Vec& g, Mat& h) override;

    Vec lower() const { return Vec::Constant(n_, sup_.g_min); }
    Vec upper() const { return Vec::Constant(n_, sup_.g_max); }
    double grad_scale() const;

private:
    const SupplierModel& sup_;
    std::span<const double> price_;
    int n_;
    double dt_;
};

// Maximizes -sum_k [qos_cost(x[k]) + price[k] d[k]] dt over box-bounded
// deviations. Throws ValidationError on bad inputs and SolverError (with the
// best iterate) if the iteration cap is hit.
BestResponse aggregator_best_response(const LoadClass& cls, const Trajectory& price,
                                      const SolverOptions& opts = {},
                                      const std::vector<double>* warm_start = nullptr);

// Maximizes sum_k [-c_g(g[k]) - c_d(g_dot[k]) + price[k] g[k]] dt over
// g in [g_min, g_max].
BestResponse supplier_best_response(const SupplierModel& supplier, const Trajectory& price,
                                    const SolverOptions& opts = {},
                                    const std::vector<double>* warm_start = nullptr);

// Maximization-form objectives and their analytic gradients (used by the
// finite-difference checks).
double aggregator_objective(const LoadClass& cls, const Trajectory& price, const Trajectory& dev);
std::vector<double> aggregator_gradient(const LoadClass& cls, const Trajectory& price, const Trajectory& dev);
double supplier_objective(const SupplierModel& supplier, const Trajectory& price, const Trajectory& gen);
std::vector<double> supplier_gradient(const SupplierModel& supplier, const Trajectory& price,
                                      const Trajectory& gen);

// ---------------------------------------------------------------------------
// CPP experiment

struct CppEvent {
    double start_hours = 17.0;
    double duration_minutes = 90.0;
    double uplift_fraction = 0.10;
    double base_price = 50.0;  // currency/MWh

    void validate(const TimeGrid& grid) const;

    friend bool operator==(const CppEvent&, const CppEvent&) = default;
};

struct ClassCppResponse {
    std::string name;
    std::optional<BestResponse> response;  // empty if the solver failed
    std::string error;
    Trajectory power;                       // baseline + deviation, GW
    Trajectory soc;
    double off_minutes = 0.0;               // contiguous full turn-off from event start
};

struct CppReport {
    Trajectory price;             // two-level tariff
    Trajectory signal;            // uplift over the base tariff seen by aggregators
    std::vector<ClassCppResponse> classes;
    Trajectory total_power;
    Trajectory total_baseline;
    int event_start = 0;
    int event_steps = 0;
    double pre_bound_surge = 0.0; // max_{t<start} (P_total - P_baseline), GW
    double onset_drop = 0.0;      // one-step fall of total deviation at the event start, GW
    double turnoff_depth = 0.0;   // P_baseline[start] - P_total[start], GW
    double baseline_at_start = 0.0;
    bool all_converged = true;
};

// Builds the two-level price and solves every class. Deviations are priced at
// the uplift over the base tariff, so a zero uplift reproduces the baseline.
// Solver failures are recorded per class; the remaining classes are still
// reported.
CppReport run_cpp_experiment(const Scenario& scenario, const CppEvent& event,
                             const SolverOptions& opts = {}, int threads = 0);

}  // namespace gridce
