#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "gridce/commands.hpp"
#include "gridce/equilibrium.hpp"

namespace gridce {

namespace {

struct Suite {
    RunReport& rep;
    int failed = 0;

    void check(const std::string& name, const std::function<std::string(bool&)>& body) {
        bool ok = false;
        std::string detail;
        try {
            detail = body(ok);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("threw: ") + e.what();
        }
        if (!ok) ++failed;
        rep.diagnostics.push_back(std::string(ok ? "PASS " : "FAIL ") + name + (detail.empty() ? "" : " (" + detail + ")"));
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

Scenario small_scenario(std::mt19937_64& rng, int n, int classes) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const TimeGrid grid(n * 0.25, 15.0);
    std::vector<double> load(static_cast<std::size_t>(n));
    for (auto& v : load) v = 10.0 + 5.0 * u(rng);
    Scenario s{grid, Trajectory(grid, load, Unit::GW), {}, {}, std::nullopt};
    for (int i = 0; i < classes; ++i)
        s.classes.push_back(make_load_class("c" + std::to_string(i), 0.5 * u(rng), 0.5 + u(rng), 5.0 + 20.0 * u(rng), 4,
                                            Trajectory::constant(grid, 1.0 + u(rng), Unit::GW), 4.0));
    s.supplier = SupplierModel{0.0, 20.0, 0.5 + u(rng), 0.01, 0.0, 1e9, 15.0};
    return s;
}

}  // namespace

RunReport cmd_verify(const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.command = "verify";
    rep.config_path = opts.config.string();
    rep.seed = opts.overrides.seed.value_or(12345);
    Suite suite{rep};
    std::mt19937_64 rng(rep.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    suite.check("soc closed form", [&](bool& ok) {
        const TimeGrid grid(40.0, 5.0);
        const LoadClass c = make_load_class("c", 0.5, 1.0, 1.0, 8, Trajectory::constant(grid, 2.0, Unit::GW), 4.0);
        const Trajectory x = integrate_soc(c, Trajectory::constant(grid, 1.0, Unit::GW));
        const double err = std::abs(x[x.size() - 1] - 2.0);
        ok = err < 1e-6;
        return "x(40h) - 2 = " + fmt(err);
    });

    suite.check("qos convexity", [&](bool& ok) {
        const TimeGrid grid(1.0, 30.0);
        const LoadClass c = make_load_class("c", 0.1, 1.5, 3.0, 8, Trajectory::constant(grid, 1.0, Unit::GW), 2.0);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double x = 4.0 * u(rng) - 2.0, y = 4.0 * u(rng) - 2.0, th = u(rng);
            worst = std::max(worst, qos_cost(c, th * x + (1 - th) * y) - th * qos_cost(c, x) - (1 - th) * qos_cost(c, y));
        }
        ok = worst <= 1e-12;
        return "max violation " + fmt(worst);
    });

    auto gradient_check = [&](bool supplier, bool& ok) {
        const Scenario s = small_scenario(rng, 24, 1);
        std::vector<double> pv(24);
        for (auto& p : pv) p = 40.0 + 30.0 * u(rng);
        const Trajectory price(s.grid, pv, Unit::PricePerMWh);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> z(24);
            for (auto& v : z) v = supplier ? 10.0 + 5.0 * u(rng) : -0.9 + 1.8 * u(rng);
            const Trajectory t(s.grid, z, Unit::GW);
            const auto g = supplier ? supplier_gradient(s.supplier, price, t) : aggregator_gradient(s.classes[0], price, t);
            for (int k = 0; k < 24; ++k) {
                const double h = 1e-5 * std::max(1.0, std::abs(z[static_cast<std::size_t>(k)]));
                auto zp = z, zm = z;
                zp[static_cast<std::size_t>(k)] += h;
                zm[static_cast<std::size_t>(k)] -= h;
                const Trajectory tp(s.grid, zp, Unit::GW), tm(s.grid, zm, Unit::GW);
                const double fd = supplier ? (supplier_objective(s.supplier, price, tp) - supplier_objective(s.supplier, price, tm)) / (2 * h)
                                           : (aggregator_objective(s.classes[0], price, tp) - aggregator_objective(s.classes[0], price, tm)) / (2 * h);
                worst = std::max(worst, std::abs(fd - g[static_cast<std::size_t>(k)]) / std::max(1.0, std::abs(fd)));
            }
        }
        ok = worst <= 1e-6;
        return "max relative error " + fmt(worst);
    };
    suite.check("aggregator gradient", [&](bool& ok) { return gradient_check(false, ok); });
    suite.check("supplier gradient", [&](bool& ok) { return gradient_check(true, ok); });

    suite.check("best response complementary slackness", [&](bool& ok) {
        const Scenario s = small_scenario(rng, 48, 1);
        std::vector<double> pv(48);
        for (auto& p : pv) p = 60.0 * u(rng) - 10.0;
        const Trajectory price(s.grid, pv, Unit::PricePerMWh);
        const BestResponse br = aggregator_best_response(s.classes[0], price);
        const auto g = aggregator_gradient(s.classes[0], price, br.profile);
        const double scale = s.grid.dt_hours() * 60.0;
        double worst = 0.0;
        for (int k = 0; k < 48; ++k) {
            const double d = br.profile[k], lo = s.classes[0].dev_min[k], hi = s.classes[0].dev_max[k];
            const double gk = g[static_cast<std::size_t>(k)] / scale;
            if (d <= lo + 1e-9) worst = std::max(worst, gk);        // ascent direction must point down
            else if (d >= hi - 1e-9) worst = std::max(worst, -gk);
            else worst = std::max(worst, std::abs(gk));
        }
        const double base = aggregator_objective(s.classes[0], price, Trajectory::zeros(s.grid, Unit::GW));
        ok = worst <= 1e-6 && br.objective >= base - 1e-9;
        return "max sign violation " + fmt(worst);
    });

    suite.check("weak duality", [&](bool& ok) {
        const Scenario s = small_scenario(rng, 24, 2);
        const EquilibriumSolution spp = solve_spp(s);
        double worst = -INFINITY;
        for (int t = 0; t < 10; ++t) {
            std::vector<double> lam(24);
            for (auto& v : lam) v = 100.0 * u(rng);
            const double phi = dual_function(s, Trajectory(s.grid, lam, Unit::PricePerMWh)).value;
            worst = std::max(worst, phi - spp.primal_value);
        }
        ok = worst <= 1e-9 * std::abs(spp.primal_value);
        return "max phi - primal " + fmt(worst);
    });

    suite.check("strong duality and price agreement", [&](bool& ok) {
        const Scenario s = small_scenario(rng, 48, 2);
        const EquilibriumSolution dual = find_equilibrium_price(s);
        const EquilibriumSolution spp = solve_spp(s);
        double diff = 0.0;
        for (int k = 0; k < 48; ++k) diff = std::max(diff, std::abs(dual.price[k] - spp.price[k]));
        const double rel = diff / std::max(1.0, std::abs(spp.price.max()));
        ok = dual.converged && dual.relative_gap() <= 1e-6 && rel <= 1e-4;
        return "gap " + fmt(dual.relative_gap()) + ", price diff " + fmt(rel);
    });

    suite.check("ensemble determinism and safety", [&](bool& ok) {
        PopulationParams p;
        p.n_loads = 2000;
        EnsembleState a = make_population(p, 10.0, 99), b = make_population(p, 10.0, 99);
        SimulationSpec spec;
        spec.hours = 2.0;
        const EnsembleRecord ra = simulate(a, spec);
        const EnsembleRecord rb = simulate(b, spec);
        ok = ra.micro_power_kw == rb.micro_power_kw && ra.deadband_violations == 0;
        return "violations " + std::to_string(ra.deadband_violations);
    });

    rep.exit_code = suite.failed == 0 ? kExitOk : kExitSolver;
    rep.metrics.emplace_back("failed_checks", suite.failed);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace gridce
