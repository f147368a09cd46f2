#pragma once

// Social planner's problem and equilibrium price discovery by Lagrangian
// decomposition of the balance constraint g = l + P_b + d_sigma.
//
// The dual function is
//   phi(lam) = min_g [C(g) - dt lam.g] + sum_i min_{d_i} [Q_i(d_i) + dt lam.d_i]
//              + dt lam.(l + P_b)
// where C and Q_i are the supplier and class costs. Its gradient is
// dt * (l + P_b - g + d_sigma), and lam at the maximum is the equilibrium price.

#include <filesystem>
#include <string>
#include <vector>

#include "gridce/agents.hpp"
#include "gridce/model.hpp"

namespace gridce {

struct EquilibriumOptions {
    double tol = 1e-6;          // relative gap and balance (fraction of the power scale)
    int max_iters = 200;        // outer (dual or multiplier) iterations
    SolverOptions sub{1e-8, 50000};
    int threads = 0;
};

struct ConvergenceRecord {
    int iter = 0;
    double dual_value = 0.0;
    double primal_value = 0.0;
    double gap = 0.0;           // relative
    double balance = 0.0;       // GW
    double step = 0.0;
};

struct EquilibriumSolution {
    Trajectory price;           // currency/MWh
    Trajectory gen;             // GW
    std::vector<Trajectory> devs;
    std::vector<Trajectory> socs;
    double primal_value = 0.0;  // total cost, k$
    double dual_value = 0.0;
    double duality_gap = 0.0;   // primal - dual, k$ (>= 0)
    double balance_residual = 0.0;
    int iters = 0;
    bool converged = false;
    std::vector<ConvergenceRecord> log;

    double relative_gap() const;
};

struct DualEvaluation {
    double value = 0.0;
    Trajectory subgradient;     // l + P_b - g + d_sigma, GW
    Trajectory gen;
    std::vector<Trajectory> devs;
    double supplier_cost = 0.0; // min_g [C(g) - dt lam.g]
    std::vector<double> class_costs;
};

// Solves the supplier and class subproblems at `lambda`. Class subproblems run
// in parallel; warm starts (if given) are indexed [supplier, class 0, ...].
DualEvaluation dual_function(const Scenario& scenario, const Trajectory& lambda, const SolverOptions& sub = {1e-8, 50000},
                             int threads = 0, const std::vector<std::vector<double>>* warm = nullptr);

// Total cost C(g) + sum_i Q_i(d_i) of an allocation (minimization form).
double primal_cost(const Scenario& scenario, const Trajectory& gen, const std::vector<Trajectory>& devs);

// Dual Newton ascent on phi with a backtracking line search. The returned
// allocation is the agents' best responses at the final price, with
// generation taken from the balance equation.
EquilibriumSolution find_equilibrium_price(const Scenario& scenario, const EquilibriumOptions& opts = {});

// Direct primal solve by the method of multipliers on the balance
// constraint; each inner problem is a joint box-constrained Newton solve over
// generation and all deviations. Throws InfeasibleError if the scenario
// cannot be balanced, SolverError on non-convergence.
EquilibriumSolution solve_spp(const Scenario& scenario, const EquilibriumOptions& opts = {});

struct MarginalValueReport {
    std::string name;
    std::vector<int> steps;          // interior indices checked
    std::vector<double> discrete;    // exact discrete identity residual, normalized
    std::vector<double> continuous;  // |-c'(x_k) - (alpha lam_k - (lam_{k+1} - lam_k)/dt)|, normalized
    double scale = 1.0;              // normalization, k$/(GWh h)
    double discrete_max = 0.0;
    double discrete_rms = 0.0;
    double continuous_max = 0.0;
    double continuous_rms = 0.0;
};

// Marginal value of stored energy against the price at interior steps where
// the preceding deviation is strictly inside its bounds. The discrete form
//   c'(x_k) = (e^{-alpha dt} lam_k - lam_{k-1}) / gain
// holds exactly at optimality of the discretized problem; the continuous form
// -c'(x) = alpha lam - dlam/dt holds up to O(dt). Both are divided by the
// largest magnitude among c'(x_k), alpha lam_k and dlam/dt over the checked
// steps.
std::vector<MarginalValueReport> check_marginal_value(const EquilibriumSolution& sol,
                                                      std::span<const LoadClass> classes);

double max_price_jump(const Trajectory& price);

void write_convergence_log(const std::filesystem::path& path, const std::vector<ConvergenceRecord>& log);

}  // namespace gridce
