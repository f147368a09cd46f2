#include <iostream>

#include <CLI11.hpp>

#include "gridce/commands.hpp"

int main(int argc, char** argv) {
    using namespace gridce;
    CLI::App app{"Dynamic competitive-equilibrium simulator for grid flexibility"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    RunOptions opts;
    int steps = 0;
    double uplift = -1.0, bump = NAN, tol = 0.0, ramp = -1.0;
    std::uint64_t seed = 0;
    int n_loads = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opts.config, "scenario config (JSON)");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
        sub->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--tol", tol, "solver tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--steps", steps, "time steps over the horizon")->check(CLI::Range(2, 1000000));
    };

    auto* cpp = app.add_subcommand("cpp", "critical-peak-pricing response of the load classes");
    add_common(cpp, true);
    cpp->add_option("--uplift", uplift, "price uplift fraction during the event")->check(CLI::NonNegativeNumber);

    auto* eq = app.add_subcommand("equilibrium", "equilibrium price by dual decomposition");
    add_common(eq, true);
    eq->add_option("--bump-gw", bump, "scarcity net-load bump (GW)");
    eq->add_option("--ramp-cost", ramp, "supplier ramp-cost coefficient")->check(CLI::NonNegativeNumber);

    auto* ens = app.add_subcommand("ensemble", "water-heater ensemble baseline and tracking");
    add_common(ens, true);
    ens->add_option("--loads", n_loads, "number of loads")->check(CLI::PositiveNumber);

    auto* ver = app.add_subcommand("verify", "run the invariant suite");
    add_common(ver, false);

    CLI11_PARSE(app, argc, argv);

    if (steps > 0) opts.overrides.steps = steps;
    if (uplift >= 0.0) opts.overrides.uplift = uplift;
    if (!std::isnan(bump)) opts.overrides.bump_gw = bump;
    if (tol > 0.0) opts.overrides.tol = tol;
    if (ramp >= 0.0) opts.overrides.ramp_cost = ramp;
    if (seed > 0) opts.overrides.seed = seed;
    if (n_loads > 0) opts.overrides.n_loads = n_loads;

    try {
        RunReport rep;
        if (*cpp) rep = cmd_cpp(opts);
        else if (*eq) rep = cmd_equilibrium(opts);
        else if (*ens) rep = cmd_ensemble(opts);
        else rep = cmd_verify(opts);
        std::cout << rep.to_text();
        return rep.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
