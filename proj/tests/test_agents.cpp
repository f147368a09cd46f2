#include <doctest.h>

#include <cmath>
#include <random>

#include <functional>

#include "gridce/agents.hpp"

using namespace gridce;

namespace {

std::vector<double> fd_gradient(const std::vector<double>& z, const std::function<double(const std::vector<double>&)>& f) {
    std::vector<double> g(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double h = 1e-5 * std::max(1.0, std::abs(z[k]));
        auto zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        g[k] = (f(zp) - f(zm)) / (2 * h);
    }
    return g;
}

Trajectory random_price(const TimeGrid& g, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(static_cast<std::size_t>(g.n_steps()));
    for (auto& v : p) v = u(rng);
    return Trajectory(g, p, Unit::PricePerMWh);
}

}  // namespace

TEST_CASE("aggregator gradient agrees with finite differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const TimeGrid g(4.0, 10.0);
    for (int p : {2, 8}) {
        const LoadClass c = make_load_class("c", 0.3, 1.0, 10.0, p, Trajectory::constant(g, 2.0, Unit::GW), 4.0, 0.2);
        const Trajectory price = random_price(g, rng, -20.0, 80.0);
        for (int t = 0; t < 5; ++t) {
            std::vector<double> d(static_cast<std::size_t>(g.n_steps()));
            for (int k = 0; k < g.n_steps(); ++k) d[k] = c.dev_min[k] + (c.dev_max[k] - c.dev_min[k]) * u(rng);
            const auto an = aggregator_gradient(c, price, Trajectory(g, d, Unit::GW));
            const auto fd = fd_gradient(d, [&](const std::vector<double>& z) {
                return aggregator_objective(c, price, Trajectory(g, z, Unit::GW));
            });
            for (std::size_t k = 0; k < d.size(); ++k) CHECK(an[k] == doctest::Approx(fd[k]).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("supplier gradient agrees with finite differences") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    const TimeGrid g(4.0, 10.0);
    const SupplierModel s{2.0, 20.0, 0.4, 0.7, 0.0, 100.0, 10.0};
    const Trajectory price = random_price(g, rng, 0.0, 80.0);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> z(static_cast<std::size_t>(g.n_steps()));
        for (auto& v : z) v = u(rng);
        const auto an = supplier_gradient(s, price, Trajectory(g, z, Unit::GW));
        const auto fd = fd_gradient(z, [&](const std::vector<double>& y) { return supplier_objective(s, price, Trajectory(g, y, Unit::GW)); });
        for (std::size_t k = 0; k < z.size(); ++k) CHECK(an[k] == doctest::Approx(fd[k]).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("supplier best response solves the tridiagonal normal equations") {
    std::mt19937_64 rng(13);
    const TimeGrid g(6.0, 15.0);
    const int n = g.n_steps();
    const double dt = g.dt_hours();
    const SupplierModel s{0.0, 15.0, 0.3, 2.0, -1e9, 1e9, 20.0};
    const Trajectory price = random_price(g, rng, 20.0, 60.0);
    // Thomas algorithm on the stationarity conditions.
    const double off = -2.0 * s.ramp_cost / dt;
    std::vector<double> diag(n), rhs(n);
    for (int k = 0; k < n; ++k) {
        diag[k] = 2.0 * s.a2 * dt + 2.0 * s.ramp_cost / dt * (k + 1 < n ? 2.0 : 1.0);
        rhs[k] = dt * (price[k] - s.a1) + (k == 0 ? 2.0 * s.ramp_cost / dt * s.g0 : 0.0);
    }
    for (int k = 1; k < n; ++k) {
        const double m = off / diag[k - 1];
        diag[k] -= m * off;
        rhs[k] -= m * rhs[k - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int k = n - 2; k >= 0; --k) x[k] = (rhs[k] - off * x[k + 1]) / diag[k];

    const BestResponse br = supplier_best_response(s, price, {1e-12, 1000});
    for (int k = 0; k < n; ++k) CHECK(br.profile[k] == doctest::Approx(x[k]).epsilon(1e-8));
}

TEST_CASE("supplier best response respects generation bounds") {
    std::mt19937_64 rng(14);
    const TimeGrid g(6.0, 15.0);
    const SupplierModel s{0.0, 15.0, 0.3, 0.5, 5.0, 30.0, 10.0};
    const BestResponse br = supplier_best_response(s, random_price(g, rng, -50.0, 100.0));
    for (int k = 0; k < g.n_steps(); ++k) {
        CHECK(br.profile[k] >= 5.0 - 1e-12);
        CHECK(br.profile[k] <= 30.0 + 1e-12);
    }
}

TEST_CASE("aggregator best response satisfies complementary slackness") {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const TimeGrid g(8.0, 10.0);
    for (int trial = 0; trial < 8; ++trial) {
        const LoadClass c = make_load_class("c", 0.5 * u(rng), 0.5 + u(rng), 5.0 + 20.0 * u(rng), trial % 2 ? 8 : 2,
                                            Trajectory::constant(g, 1.0 + u(rng), Unit::GW), 4.0);
        const Trajectory price = random_price(g, rng, -10.0, 80.0);
        const BestResponse br = aggregator_best_response(c, price);
        const auto grad = aggregator_gradient(c, price, br.profile);
        const double scale = g.dt_hours() * 80.0;
        for (int k = 0; k < g.n_steps(); ++k) {
            const double d = br.profile[k];
            REQUIRE(d >= c.dev_min[k] - 1e-12);
            REQUIRE(d <= c.dev_max[k] + 1e-12);
            const double gk = grad[k] / scale;
            if (d <= c.dev_min[k] + 1e-9) CHECK(gk <= 1e-6);
            else if (d >= c.dev_max[k] - 1e-9) CHECK(gk >= -1e-6);
            else CHECK(std::abs(gk) <= 1e-6);
        }
        CHECK(br.objective >= aggregator_objective(c, price, Trajectory::zeros(g, Unit::GW)) - 1e-9);
    }
}

TEST_CASE("zero price and empty store give zero deviation") {
    const TimeGrid g(2.0, 15.0);
    const LoadClass c = make_load_class("c", 0.2, 1.0, 5.0, 4, Trajectory::constant(g, 1.0, Unit::GW), 3.0);
    const BestResponse br = aggregator_best_response(c, Trajectory::zeros(g, Unit::PricePerMWh));
    for (int k = 0; k < g.n_steps(); ++k) CHECK(std::abs(br.profile[k]) <= 1e-9);
}

TEST_CASE("aggregator rejects mismatched price grids") {
    const TimeGrid g(2.0, 15.0), h(3.0, 15.0);
    const LoadClass c = make_load_class("c", 0.2, 1.0, 5.0, 4, Trajectory::constant(g, 1.0, Unit::GW), 3.0);
    CHECK_THROWS_AS(aggregator_best_response(c, Trajectory::zeros(h, Unit::PricePerMWh)), DimensionError);
}

TEST_CASE("cpp experiment: zero uplift reproduces the baseline, positive uplift turns storage off") {
    const TimeGrid g(24.0, 15.0);
    Scenario s{g, Trajectory::constant(g, 20.0, Unit::GW), {}, {}, std::nullopt};
    s.classes.push_back(make_load_class("wh", 0.04, 10.0, 20.0, 8, Trajectory::constant(g, 2.0, Unit::GW), 6.0));
    CppEvent ev{17.0, 90.0, 0.0, 50.0};
    const CppReport flat = run_cpp_experiment(s, ev);
    for (int k = 0; k < g.n_steps(); ++k) CHECK(flat.total_power[k] == doctest::Approx(flat.total_baseline[k]));
    ev.uplift_fraction = 0.1;
    const CppReport r = run_cpp_experiment(s, ev);
    CHECK(r.all_converged);
    CHECK(r.event_steps == 6);
    CHECK(r.classes[0].off_minutes == doctest::Approx(90.0));
    CHECK(r.pre_bound_surge > 0.0);
    CHECK(r.turnoff_depth == doctest::Approx(2.0));
}

TEST_CASE("cpp experiment is deterministic across thread counts") {
    const TimeGrid g(24.0, 15.0);
    Scenario s{g, Trajectory::constant(g, 20.0, Unit::GW), {}, {}, std::nullopt};
    for (int i = 0; i < 3; ++i)
        s.classes.push_back(make_load_class("c" + std::to_string(i), 0.1 * (i + 1), 2.0, 10.0, 8, Trajectory::constant(g, 1.0 + i, Unit::GW), 5.0));
    const CppEvent ev;
    const CppReport a = run_cpp_experiment(s, ev, {}, 1), b = run_cpp_experiment(s, ev, {}, 3);
    CHECK(a.total_power == b.total_power);
}

TEST_CASE("supplier without ramp cost follows the pointwise first-order condition") {
    std::mt19937_64 rng(16);
    const TimeGrid g(6.0, 30.0);
    const SupplierModel s{0.0, 0.0, 1.0, 0.0, 3.0, 20.0, 5.0};
    const Trajectory price = random_price(g, rng, -10.0, 60.0);
    const BestResponse br = supplier_best_response(s, price, {1e-12, 1000});
    for (int k = 0; k < g.n_steps(); ++k) CHECK(br.profile[k] == doctest::Approx(std::clamp(price[k] / 2.0, 3.0, 20.0)));
}

TEST_CASE("large ramp cost at constant price approaches the clamped stationary output") {
    const TimeGrid g(24.0, 30.0);
    const double rho = 50.0;
    const SupplierModel s{0.0, 10.0, 0.5, 1e4, 0.0, 1e9, 40.0};
    const BestResponse br = supplier_best_response(s, Trajectory::constant(g, rho, Unit::PricePerMWh), {1e-12, 1000});
    const double target = (rho - s.a1) / (2 * s.a2);
    // Starts at g0 = target and should stay there.
    for (int k = 0; k < g.n_steps(); ++k) CHECK(br.profile[k] == doctest::Approx(target).epsilon(1e-8));
}

TEST_CASE("supplier best response beats a dense grid search on three steps") {
    const TimeGrid g(0.75, 15.0);
    const SupplierModel s{1.0, 10.0, 0.8, 0.05, 0.0, 30.0, 12.0};
    const Trajectory price(g, {30.0, 55.0, 40.0}, Unit::PricePerMWh);
    double best = -INFINITY;
    for (int i = 0; i <= 120; ++i)
        for (int j = 0; j <= 120; ++j)
            for (int l = 0; l <= 120; ++l)
                best = std::max(best, supplier_objective(s, price, Trajectory(g, {i * 0.25, j * 0.25, l * 0.25}, Unit::GW)));
    const BestResponse br = supplier_best_response(s, price);
    CHECK(br.objective >= best - 1e-9);
    CHECK(br.objective == doctest::Approx(best).epsilon(1e-3));
}

TEST_CASE("cpp with zero uplift reports zero metrics") {
    const TimeGrid g(24.0, 15.0);
    Scenario s{g, Trajectory::constant(g, 20.0, Unit::GW), {}, {}, std::nullopt};
    s.classes.push_back(make_load_class("pool", 0.0, 20.0, 5.0, 8, Trajectory::constant(g, 1.5, Unit::GW), 3.0));
    const CppReport r = run_cpp_experiment(s, CppEvent{17.0, 90.0, 0.0, 50.0});
    CHECK(r.pre_bound_surge == 0.0);
    CHECK(r.onset_drop == 0.0);
    CHECK(r.turnoff_depth == 0.0);
    CHECK(r.classes[0].off_minutes == 0.0);
}
