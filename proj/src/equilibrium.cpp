#include "gridce/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridce/csv.hpp"
#include "gridce/parallel.hpp"
#include "gridce/scenarios.hpp"

namespace gridce {

double EquilibriumSolution::relative_gap() const {
    return duality_gap / std::max(1.0, std::abs(primal_value));
}

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }
Vec to_vec(const Trajectory& t) { return to_vec(t.vector()); }

std::vector<char> free_mask(const Vec& z, const Vec& lo, const Vec& hi) {
    std::vector<char> f(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const bool at_lo = z(i) <= lo(i) + 1e-9 * (1.0 + std::abs(lo(i)));
        const bool at_hi = z(i) >= hi(i) - 1e-9 * (1.0 + std::abs(hi(i)));
        f[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
    }
    return f;
}

// (H_FF + mu I)^{-1} scattered into an n x n matrix, zero outside F.
void add_reduced_inverse(const Mat& h, const std::vector<char>& is_free, double rel_mu, Mat& acc) {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(is_free.size()); ++i)
        if (is_free[static_cast<std::size_t>(i)]) idx.push_back(i);
    const int m = static_cast<int>(idx.size());
    if (m == 0) return;
    Mat r(m, m);
    double maxd = 0.0;
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) r(a, b) = h(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        maxd = std::max(maxd, std::abs(r(a, a)));
    }
    double mu = rel_mu * std::max(maxd, 1e-12);
    for (int attempt = 0; attempt < 30; ++attempt, mu *= 100.0) {
        Mat rm = r;
        rm.diagonal().array() += mu;
        Eigen::LLT<Mat> llt(rm);
        if (llt.info() != Eigen::Success) continue;
        const Mat inv = llt.solve(Mat::Identity(m, m));
        if (!inv.allFinite()) continue;
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) acc(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]) += inv(a, b);
        return;
    }
}

double linear_term(const Scenario& s, const Trajectory& lambda) {
    const Trajectory net = s.inflexible_load + (s.classes.empty() ? Trajectory::zeros(s.grid, Unit::GW) : s.total_baseline());
    double v = 0.0;
    for (int k = 0; k < s.grid.n_steps(); ++k) v += lambda[k] * net[k];
    return v * s.grid.dt_hours();
}

Trajectory net_demand(const Scenario& s) {
    return s.classes.empty() ? s.inflexible_load : s.inflexible_load + s.total_baseline();
}

// Balanced primal point (d, l + P_b + d_sigma clipped to the supplier bounds).
Trajectory balanced_generation(const Scenario& s, const std::vector<Trajectory>& devs) {
    std::vector<double> g(net_demand(s).vector());
    for (const auto& d : devs)
        for (int k = 0; k < s.grid.n_steps(); ++k) g[static_cast<std::size_t>(k)] += d[k];
    for (double& v : g) v = std::clamp(v, s.supplier.g_min, s.supplier.g_max);
    return Trajectory(s.grid, std::move(g), Unit::GW);
}

Trajectory imbalance(const Scenario& s, const Trajectory& gen, const std::vector<Trajectory>& devs) {
    std::vector<double> r(net_demand(s).vector());
    for (int k = 0; k < s.grid.n_steps(); ++k) r[static_cast<std::size_t>(k)] -= gen[k];
    for (const auto& d : devs)
        for (int k = 0; k < s.grid.n_steps(); ++k) r[static_cast<std::size_t>(k)] += d[k];
    return Trajectory(s.grid, std::move(r), Unit::GW);
}

double inf_norm(const Trajectory& t) { return std::max(std::abs(t.max()), std::abs(t.min())); }

std::vector<Trajectory> socs_of(const Scenario& s, const std::vector<Trajectory>& devs) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < devs.size(); ++i) out.push_back(integrate_soc(s.classes[i], devs[i]));
    return out;
}

void require_equilibrium_scenario(const Scenario& s) {
    s.validate(false);
    if (s.exogenous_price) throw ValidationError("equilibrium: scenario must not carry an exogenous price");
    check_feasible(s);
}

}  // namespace

double primal_cost(const Scenario& s, const Trajectory& gen, const std::vector<Trajectory>& devs) {
    return -eval_supplier_utility(s.supplier, gen) - eval_demand_utility(s.classes, devs);
}

DualEvaluation dual_function(const Scenario& s, const Trajectory& lambda, const SolverOptions& sub, int threads,
                             const std::vector<std::vector<double>>* warm) {
    require_on_grid(lambda, s.grid, Unit::PricePerMWh, "dual multiplier");
    const std::size_t m = s.classes.size();
    auto warm_at = [&](std::size_t i) -> const std::vector<double>* {
        return warm && warm->size() > i && !(*warm)[i].empty() ? &(*warm)[i] : nullptr;
    };

    std::vector<std::optional<BestResponse>> class_br(m);
    std::optional<BestResponse> sup_br;
    parallel_for(static_cast<int>(m) + 1, threads, [&](int t) {
        if (t == 0) sup_br = supplier_best_response(s.supplier, lambda, sub, warm_at(0));
        else class_br[static_cast<std::size_t>(t - 1)] =
                 aggregator_best_response(s.classes[static_cast<std::size_t>(t - 1)], lambda, sub, warm_at(static_cast<std::size_t>(t)));
    });

    DualEvaluation ev{0.0, Trajectory::zeros(s.grid, Unit::GW), sup_br->profile, {}, -sup_br->objective, {}};
    ev.value = ev.supplier_cost + linear_term(s, lambda);
    for (auto& br : class_br) {
        ev.class_costs.push_back(-br->objective);
        ev.value += -br->objective;
        ev.devs.push_back(std::move(br->profile));
    }
    ev.subgradient = imbalance(s, ev.gen, ev.devs);
    return ev;
}

// --- method of multipliers --------------------------------------------------------

namespace {

// Augmented Lagrangian over z = [g; d_1; ...; d_M]:
//   C(g) + sum_i Q_i(d_i) + dt lam.r + rho dt / 2 |r|^2,  r = l + P_b - g + d_sigma.
// Its Hessian is blockdiag(H_g, H_1, ...) + rho dt A^T A with A = [-I, I, ..., I];
// reduced Newton systems are solved with the Woodbury identity so only
// N x N factorizations are needed.
class JointObjective final : public BoxObjective {
public:
    JointObjective(const Scenario& s, std::vector<double> zero_price)
        : s_(s), n_(s.grid.n_steps()), m_(static_cast<int>(s.classes.size())), dt_(s.grid.dt_hours()),
          zero_(std::move(zero_price)), net_(to_vec(net_demand(s))), sup_(s.supplier, zero_, n_, dt_) {
        for (const auto& c : s.classes) agg_.emplace_back(c, zero_);
        blocks_.resize(static_cast<std::size_t>(m_) + 1);
    }

    int size() const override { return (m_ + 1) * n_; }
    void set_multiplier(const Vec& lam, double rho) {
        lam_ = lam;
        rho_ = rho;
    }

    Vec residual(const Vec& z) const {
        Vec r = net_ - z.segment(0, n_);
        for (int i = 0; i < m_; ++i) r += z.segment((i + 1) * n_, n_);
        return r;
    }

    double value(const Vec& z) override {
        double v = sup_.value(z.segment(0, n_));
        for (int i = 0; i < m_; ++i) v += agg_[static_cast<std::size_t>(i)].value(z.segment((i + 1) * n_, n_));
        const Vec r = residual(z);
        return v + dt_ * lam_.dot(r) + 0.5 * rho_ * dt_ * r.squaredNorm();
    }

    double value_gradient(const Vec& z, Vec& grad) override {
        grad.resize(size());
        const Vec r = residual(z);
        const Vec mult = dt_ * (lam_ + rho_ * r);
        Vec gb;
        double v = sup_.value_gradient(z.segment(0, n_), gb);
        grad.segment(0, n_) = gb - mult;
        for (int i = 0; i < m_; ++i) {
            v += agg_[static_cast<std::size_t>(i)].value_gradient(z.segment((i + 1) * n_, n_), gb);
            grad.segment((i + 1) * n_, n_) = gb + mult;
        }
        return v + dt_ * lam_.dot(r) + 0.5 * rho_ * dt_ * r.squaredNorm();
    }

    void set_curvature_point(const Vec& z) override {
        sup_.hessian(z.segment(0, n_), blocks_[0]);
        for (int i = 0; i < m_; ++i)
            agg_[static_cast<std::size_t>(i)].hessian(z.segment((i + 1) * n_, n_), blocks_[static_cast<std::size_t>(i) + 1]);
    }

    double curvature_diag(int j) const override {
        return blocks_[static_cast<std::size_t>(j / n_)](j % n_, j % n_) + rho_ * dt_;
    }

    bool solve_free(const std::vector<char>& is_free, double mu, const Vec& rhs, Vec& p) override {
        const double c = rho_ * dt_;
        Mat schur = Mat::Identity(n_, n_) / c;
        Vec ay = Vec::Zero(n_);
        std::vector<std::vector<int>> idx(static_cast<std::size_t>(m_) + 1);
        std::vector<Mat> inv(static_cast<std::size_t>(m_) + 1);
        std::vector<Vec> y(static_cast<std::size_t>(m_) + 1);
        for (int b = 0; b <= m_; ++b) {
            auto& ix = idx[static_cast<std::size_t>(b)];
            for (int k = 0; k < n_; ++k)
                if (is_free[static_cast<std::size_t>(b * n_ + k)]) ix.push_back(k);
            const int f = static_cast<int>(ix.size());
            if (f == 0) continue;
            const Mat& h = blocks_[static_cast<std::size_t>(b)];
            Mat r(f, f);
            Vec rb(f);
            for (int a = 0; a < f; ++a) {
                rb(a) = rhs(b * n_ + ix[static_cast<std::size_t>(a)]);
                for (int e = 0; e < f; ++e) r(a, e) = h(ix[static_cast<std::size_t>(a)], ix[static_cast<std::size_t>(e)]);
            }
            r.diagonal().array() += std::max(mu, 1e-10 * c);
            Eigen::LLT<Mat> llt(r);
            if (llt.info() != Eigen::Success) return false;
            inv[static_cast<std::size_t>(b)] = llt.solve(Mat::Identity(f, f));
            y[static_cast<std::size_t>(b)] = llt.solve(rb);
            const double sign = b == 0 ? -1.0 : 1.0;
            const Mat& bi = inv[static_cast<std::size_t>(b)];
            for (int a = 0; a < f; ++a) {
                ay(ix[static_cast<std::size_t>(a)]) += sign * y[static_cast<std::size_t>(b)](a);
                for (int e = 0; e < f; ++e) schur(ix[static_cast<std::size_t>(a)], ix[static_cast<std::size_t>(e)]) += bi(a, e);
            }
        }
        Eigen::LLT<Mat> sl(schur);
        if (sl.info() != Eigen::Success) return false;
        const Vec v = sl.solve(ay);
        for (int b = 0; b <= m_; ++b) {
            const auto& ix = idx[static_cast<std::size_t>(b)];
            const int f = static_cast<int>(ix.size());
            if (f == 0) continue;
            const double sign = b == 0 ? -1.0 : 1.0;
            Vec av(f);
            for (int a = 0; a < f; ++a) av(a) = sign * v(ix[static_cast<std::size_t>(a)]);
            const Vec pb = y[static_cast<std::size_t>(b)] - inv[static_cast<std::size_t>(b)] * av;
            for (int a = 0; a < f; ++a) p(b * n_ + ix[static_cast<std::size_t>(a)]) = pb(a);
        }
        return p.allFinite();
    }

    Vec lower() const {
        Vec lo(size());
        lo.segment(0, n_).setConstant(s_.supplier.g_min);
        for (int i = 0; i < m_; ++i) lo.segment((i + 1) * n_, n_) = agg_[static_cast<std::size_t>(i)].lower();
        return lo;
    }
    Vec upper() const {
        Vec hi(size());
        hi.segment(0, n_).setConstant(s_.supplier.g_max);
        for (int i = 0; i < m_; ++i) hi.segment((i + 1) * n_, n_) = agg_[static_cast<std::size_t>(i)].upper();
        return hi;
    }
    double curvature_scale() const {
        Mat h;
        const_cast<SupplierObjective&>(sup_).hessian(Vec::Zero(n_), h);
        return std::max(1e-6, h.diagonal().maxCoeff());
    }

private:
    const Scenario& s_;
    int n_, m_;
    double dt_;
    std::vector<double> zero_;
    Vec net_;
    SupplierObjective sup_;
    std::vector<AggregatorObjective> agg_;
    std::vector<Mat> blocks_;
    Vec lam_;
    double rho_ = 1.0;
};

struct MultiplierRun {
    Vec z;
    Vec lam;
    int iters = 0;
    double inner_res = 0.0;
    std::vector<ConvergenceRecord> log;
};

MultiplierRun run_multipliers(const Scenario& s, const EquilibriumOptions& opts, Vec lam, Vec z, int first_iter) {
    const int n = s.grid.n_steps();
    const double dt = s.grid.dt_hours();
    const double scale = s.power_scale();
    JointObjective f(s, std::vector<double>(static_cast<std::size_t>(n), 0.0));
    const Vec lo = f.lower();
    const Vec hi = f.upper();

    MultiplierRun run;
    double rho = 10.0 * f.curvature_scale() / dt;
    double last_balance = INFINITY;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        f.set_multiplier(lam, rho);
        const double gscale = dt * std::max(1.0, lam.cwiseAbs().maxCoeff());
        BoxNewtonResult r = minimize_box(f, lo, hi, z, BoxNewtonOptions{opts.sub.tol, gscale, opts.sub.max_iters});
        z = r.z;
        run.inner_res = r.residual;
        const Vec res = f.residual(z);
        const double balance = res.cwiseAbs().maxCoeff();
        lam += rho * res;
        run.log.push_back({first_iter + it, 0.0, 0.0, 0.0, balance, rho});
        if (balance <= opts.tol * scale && r.converged) break;
        if (balance > 0.25 * last_balance) rho *= 10.0;
        last_balance = balance;
    }
    run.z = std::move(z);
    run.lam = std::move(lam);
    run.iters = it;
    return run;
}

// Primal-dual pair from a multiplier run, certified through the decomposed dual.
EquilibriumSolution certify(const Scenario& s, const EquilibriumOptions& opts, MultiplierRun run,
                            std::vector<ConvergenceRecord> log) {
    const TimeGrid& grid = s.grid;
    const int n = grid.n_steps();
    const int m = static_cast<int>(s.classes.size());
    std::vector<Trajectory> devs;
    for (int i = 0; i < m; ++i) devs.emplace_back(grid, to_std(run.z.segment((i + 1) * n, n)), Unit::GW);
    EquilibriumSolution sol{Trajectory(grid, to_std(run.lam), Unit::PricePerMWh),
                            Trajectory(grid, to_std(run.z.segment(0, n)), Unit::GW),
                            {}, {}, 0.0, 0.0, 0.0, 0.0, 0, false, std::move(log)};
    sol.balance_residual = inf_norm(imbalance(s, sol.gen, devs));
    const Trajectory g_bal = balanced_generation(s, devs);
    sol.primal_value = primal_cost(s, g_bal, devs);
    sol.dual_value = dual_function(s, sol.price, opts.sub, opts.threads).value;
    sol.duality_gap = std::max(0.0, sol.primal_value - sol.dual_value);
    sol.devs = std::move(devs);
    sol.socs = socs_of(s, sol.devs);
    sol.log.insert(sol.log.end(), run.log.begin(), run.log.end());
    if (!sol.log.empty()) {
        sol.log.back().primal_value = sol.primal_value;
        sol.log.back().dual_value = sol.dual_value;
        sol.log.back().gap = sol.relative_gap();
    }
    sol.iters = sol.log.empty() ? 0 : sol.log.back().iter;
    sol.converged = sol.balance_residual <= opts.tol * s.power_scale() && sol.relative_gap() <= opts.tol;
    return sol;
}

Vec stacked(const Trajectory& gen, const std::vector<Trajectory>& devs) {
    const Eigen::Index n = gen.size();
    Vec z(n * static_cast<Eigen::Index>(devs.size() + 1));
    z.segment(0, n) = to_vec(gen);
    for (std::size_t i = 0; i < devs.size(); ++i) z.segment(n * static_cast<Eigen::Index>(i + 1), n) = to_vec(devs[i]);
    return z;
}

[[noreturn]] void throw_unconverged(const std::string& who, const EquilibriumSolution& sol, const Vec& z, double inner) {
    std::ostringstream os;
    os << who << ": no convergence after " << sol.iters << " iterations (balance " << sol.balance_residual
       << " GW, relative gap " << sol.relative_gap() << ", inner residual " << inner << ")";
    throw SolverError(os.str(), to_std(z), sol.balance_residual);
}


// Multiplier iterations followed by certification; if the certified gap is
// still above tolerance, iterate on with tighter inner tolerances.
EquilibriumSolution multipliers_certified(const Scenario& s, const EquilibriumOptions& opts, Vec lam, Vec z,
                                          std::vector<ConvergenceRecord> log, const std::string& who) {
    EquilibriumOptions o = opts;
    int first = log.empty() ? 0 : log.back().iter + 1;
    for (int round = 0;; ++round) {
        MultiplierRun run = run_multipliers(s, o, std::move(lam), std::move(z), first);
        const double inner = run.inner_res;
        lam = run.lam;
        z = run.z;
        EquilibriumSolution sol = certify(s, opts, std::move(run), std::move(log));
        if (sol.converged) return sol;
        if (round == 4) throw_unconverged(who, sol, z, inner);
        log = std::move(sol.log);
        first = log.back().iter + 1;
        o.tol *= 0.1;
        o.sub.tol = std::max(1e-12, 0.1 * o.sub.tol);
    }
}
}  // namespace

EquilibriumSolution solve_spp(const Scenario& s, const EquilibriumOptions& opts) {
    require_equilibrium_scenario(s);
    const int n = s.grid.n_steps();
    const Vec net = to_vec(net_demand(s));
    Vec z = Vec::Zero(static_cast<Eigen::Index>(s.classes.size() + 1) * n);
    z.segment(0, n) = net.cwiseMax(s.supplier.g_min).cwiseMin(s.supplier.g_max);
    Vec lam(n);
    for (int k = 0; k < n; ++k) lam(k) = s.supplier.gen_marginal(z(k));
    return multipliers_certified(s, opts, std::move(lam), std::move(z), {}, "solve_spp");
}

// --- dual Newton ascent --------------------------------------------------------

EquilibriumSolution find_equilibrium_price(const Scenario& s, const EquilibriumOptions& opts) {
    // Dual Newton stalls where the dual is nonsmooth (flat QoS costs, lossless
    // classes); the remaining ascent then runs on the augmented dual.
    constexpr int kNewtonBudget = 25;
    require_equilibrium_scenario(s);
    const TimeGrid& grid = s.grid;
    const int n = grid.n_steps();
    const double dt = grid.dt_hours();
    const double scale = s.power_scale();
    const std::size_t m = s.classes.size();

    // Start from the marginal cost of serving the inflexible demand alone.
    const Trajectory net = net_demand(s);
    std::vector<double> lam0(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        lam0[static_cast<std::size_t>(k)] = s.supplier.gen_marginal(std::clamp(net[k], s.supplier.g_min, s.supplier.g_max));
    Trajectory lambda(grid, std::move(lam0), Unit::PricePerMWh);

    std::vector<std::vector<double>> warm(m + 1);
    auto evaluate = [&](const Trajectory& lam) {
        DualEvaluation e = dual_function(s, lam, opts.sub, opts.threads, &warm);
        warm[0] = e.gen.vector();
        for (std::size_t i = 0; i < m; ++i) warm[i + 1] = e.devs[i].vector();
        return e;
    };

    DualEvaluation cur = evaluate(lambda);
    EquilibriumSolution sol{lambda, cur.gen, cur.devs, {}, 0.0, 0.0, 0.0, 0.0, 0, false, {}};
    double step = 0.0;
    int short_steps = 0;

    for (int it = 0;; ++it) {
        const Trajectory g_bal = balanced_generation(s, cur.devs);
        const double primal = primal_cost(s, g_bal, cur.devs);
        const double gap = std::max(0.0, primal - cur.value);
        const double balance = inf_norm(cur.subgradient);
        const double rel_gap = gap / std::max(1.0, std::abs(primal));
        sol.log.push_back({it, cur.value, primal, rel_gap, balance, step});
        sol.price = lambda;
        sol.gen = cur.gen;
        sol.devs = cur.devs;
        sol.primal_value = primal;
        sol.dual_value = cur.value;
        sol.duality_gap = gap;
        sol.balance_residual = balance;
        sol.iters = it;
        if (balance <= opts.tol * scale && rel_gap <= opts.tol) {
            sol.converged = true;
            break;
        }
        if (it >= std::min(opts.max_iters, kNewtonBudget)) break;

        // Newton system: d phi / d lam = dt s, d^2 phi / d lam^2 = -dt^2 K with
        // K = H_g^{-1} + sum_i H_i^{-1} restricted to the free variables.
        Mat k_mat = Mat::Zero(n, n);
        Mat h;
        {
            SupplierObjective f(s.supplier, lambda.values(), n, dt);
            f.hessian(to_vec(cur.gen), h);
            add_reduced_inverse(h, free_mask(to_vec(cur.gen), f.lower(), f.upper()), 1e-12, k_mat);
        }
        for (std::size_t i = 0; i < m; ++i) {
            AggregatorObjective f(s.classes[i], lambda.values());
            const Vec d = to_vec(cur.devs[i]);
            f.hessian(d, h);
            add_reduced_inverse(h, free_mask(d, f.lower(), f.upper()), 1e-10, k_mat);
        }
        const double kmax = k_mat.diagonal().cwiseAbs().maxCoeff();
        k_mat.diagonal().array() += 1e-12 * std::max(kmax, 1e-12);
        const Vec sg = to_vec(cur.subgradient);
        Vec dir = Eigen::LDLT<Mat>(k_mat).solve(sg) / dt;
        if (!dir.allFinite()) dir = sg;

        const double slope = dt * sg.dot(dir);
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            std::vector<double> trial(lambda.vector());
            for (int k = 0; k < n; ++k) trial[static_cast<std::size_t>(k)] += t * dir(k);
            Trajectory lam_t(grid, std::move(trial), Unit::PricePerMWh);
            DualEvaluation e = evaluate(lam_t);
            const bool armijo = e.value >= cur.value + 1e-4 * t * slope;
            // Near the optimum phi changes below its rounding level; a smaller
            // imbalance is then the better progress measure.
            const bool flat = std::abs(e.value - cur.value) <= 1e-12 * std::max(1.0, std::abs(cur.value)) &&
                              inf_norm(e.subgradient) < balance;
            if (armijo || flat) {
                lambda = std::move(lam_t);
                cur = std::move(e);
                accepted = true;
                break;
            }
        }
        step = accepted ? t : 0.0;
        if (!accepted) break;
        short_steps = t < 0.1 ? short_steps + 1 : 0;
        if (short_steps >= 3) break;
    }
    if (sol.converged) {
        sol.socs = socs_of(s, sol.devs);
        return sol;
    }
    return multipliers_certified(s, opts, to_vec(sol.price), stacked(sol.gen, sol.devs), std::move(sol.log),
                                 "find_equilibrium_price");
}

// --- diagnostics -------------------------------------------------------------------

std::vector<MarginalValueReport> check_marginal_value(const EquilibriumSolution& sol, std::span<const LoadClass> classes) {
    if (classes.size() != sol.devs.size()) throw DimensionError("check_marginal_value: one class per deviation required");
    const TimeGrid& grid = sol.price.grid();
    const int n = grid.n_steps();
    const double dt = grid.dt_hours();
    std::vector<MarginalValueReport> out;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const LoadClass& c = classes[i];
        const Trajectory& d = sol.devs[i];
        const Trajectory x = integrate_soc(c, d);
        const auto [a, gamma] = soc_step(c.alpha, dt);
        MarginalValueReport rep;
        rep.name = c.name;
        std::vector<double> disc, cont, mags;
        for (int k = 1; k + 1 < n; ++k) {
            auto interior = [&](int j) {
                const double lo = c.dev_min[j], hi = c.dev_max[j];
                const double eps = 1e-7 * std::max(1.0, hi - lo);
                return d[j] > lo + eps && d[j] < hi - eps;
            };
            if (!interior(k - 1) || !interior(k)) continue;
            const double mc = qos_marginal(c, x[k]);
            const double lam = sol.price[k];
            const double slope = (sol.price[k + 1] - lam) / dt;
            rep.steps.push_back(k);
            disc.push_back(std::abs(mc - (a * lam - sol.price[k - 1]) / gamma));
            cont.push_back(std::abs(-mc - (c.alpha * lam - slope)));
            mags.push_back(std::max({std::abs(mc), std::abs(c.alpha * lam), std::abs(slope)}));
        }
        rep.scale = mags.empty() ? 1.0 : std::max(1e-12, *std::max_element(mags.begin(), mags.end()));
        double ss_d = 0.0, ss_c = 0.0;
        for (std::size_t j = 0; j < disc.size(); ++j) {
            disc[j] /= rep.scale;
            cont[j] /= rep.scale;
            rep.discrete_max = std::max(rep.discrete_max, disc[j]);
            rep.continuous_max = std::max(rep.continuous_max, cont[j]);
            ss_d += disc[j] * disc[j];
            ss_c += cont[j] * cont[j];
        }
        if (!disc.empty()) {
            rep.discrete_rms = std::sqrt(ss_d / static_cast<double>(disc.size()));
            rep.continuous_rms = std::sqrt(ss_c / static_cast<double>(disc.size()));
        }
        rep.discrete = std::move(disc);
        rep.continuous = std::move(cont);
        out.push_back(std::move(rep));
    }
    return out;
}

double max_price_jump(const Trajectory& price) {
    double j = 0.0;
    for (int k = 1; k < price.size(); ++k) j = std::max(j, std::abs(price[k] - price[k - 1]));
    return j;
}

void write_convergence_log(const std::filesystem::path& path, const std::vector<ConvergenceRecord>& log) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << "iter,dual_value,primal_value,relative_gap,balance_gw,step\n";
    for (const auto& r : log)
        out << r.iter << ',' << format_number(r.dual_value) << ',' << format_number(r.primal_value) << ','
            << format_number(r.gap) << ',' << format_number(r.balance) << ',' << format_number(r.step) << '\n';
}

}  // namespace gridce
