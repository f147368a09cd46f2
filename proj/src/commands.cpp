#include "gridce/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridce/csv.hpp"
#include "gridce/equilibrium.hpp"

namespace gridce {

double RunReport::metric(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw ValidationError("report has no metric '" + name + "'");
}

std::string RunReport::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config_path;
    j["version"] = version;
    j["seed"] = seed;
    j["wall_seconds"] = wall_seconds;
    j["exit_code"] = exit_code;
    j["outputs"] = outputs;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metrics) m[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
    j["metrics"] = m;
    j["diagnostics"] = diagnostics;
    return j.dump(2) + "\n";
}

std::string RunReport::to_text() const {
    std::ostringstream os;
    os << command << " (" << config_path << "), exit " << exit_code << ", " << wall_seconds << " s\n";
    for (const auto& [k, v] : metrics) os << "  " << k << " = " << format_number(v) << "\n";
    for (const auto& d : diagnostics) os << "  " << d << "\n";
    for (const auto& f : outputs) os << "  wrote " << f << "\n";
    return os.str();
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
    if (dynamic_cast<const SolverError*>(&e)) return kExitSolver;
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kExitConfig;
    return kExitSolver;
}

namespace {

using Clock = std::chrono::steady_clock;

class Writer {
public:
    Writer(const RunOptions& opts, RunReport& rep) : dir_(opts.out_dir), rep_(rep) {
        std::filesystem::create_directories(dir_);
    }

    void series(const std::string& file, const TimeGrid& grid, const std::vector<std::string>& names,
                const std::vector<std::vector<double>>& cols) {
        write_time_series(dir_ / file, grid, names, cols);
        rep_.outputs.push_back(file);
    }

    std::ofstream raw(const std::string& file) {
        std::ofstream out(dir_ / file);
        if (!out) throw ValidationError("cannot write '" + (dir_ / file).string() + "'");
        rep_.outputs.push_back(file);
        return out;
    }

    void summary(Clock::time_point t0) {
        rep_.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        rep_.outputs.push_back("summary.json");
        std::ofstream(dir_ / "summary.json") << rep_.to_json();
    }

private:
    std::filesystem::path dir_;
    RunReport& rep_;
};

RunReport start(const char* command, const RunOptions& opts) {
    RunReport rep;
    rep.command = command;
    rep.config_path = opts.config.string();
    return rep;
}

}  // namespace

RunReport cmd_cpp(const RunOptions& opts) {
    const auto t0 = Clock::now();
    RunReport rep = start("cpp", opts);
    const ScenarioConfig cfg = load_scenario(opts.config, opts.overrides);
    if (!cfg.cpp) throw ValidationError("cpp command needs an event of type \"cpp\"");
    const Scenario sc = cfg.cpp_scenario();
    const CppReport r = run_cpp_experiment(sc, *cfg.cpp, cfg.solver, opts.threads);

    Writer w(opts, rep);
    const TimeGrid& grid = sc.grid;
    w.series("price.csv", grid, {"price", "signal"}, {r.price.vector(), r.signal.vector()});
    std::vector<std::string> names{"total_power", "total_baseline"};
    std::vector<std::vector<double>> cols{r.total_power.vector(), r.total_baseline.vector()};
    std::vector<std::string> soc_names;
    std::vector<std::vector<double>> soc_cols;
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
        names.push_back(r.classes[i].name + "_power");
        cols.push_back(r.classes[i].power.vector());
        names.push_back(r.classes[i].name + "_baseline");
        cols.push_back(sc.classes[i].baseline.vector());
        soc_names.push_back(r.classes[i].name);
        soc_cols.push_back(r.classes[i].soc.vector());
    }
    w.series("power.csv", grid, names, cols);
    if (!soc_names.empty()) w.series("soc.csv", grid, soc_names, soc_cols);

    rep.metrics = {{"pre_bound_surge_gw", r.pre_bound_surge},
                   {"onset_drop_gw", r.onset_drop},
                   {"turnoff_depth_gw", r.turnoff_depth},
                   {"baseline_at_start_gw", r.baseline_at_start},
                   {"event_start_step", r.event_start},
                   {"event_steps", r.event_steps}};
    for (const auto& c : r.classes) {
        rep.metrics.emplace_back("off_minutes_" + c.name, c.off_minutes);
        if (c.response) rep.metrics.emplace_back("kkt_residual_" + c.name, c.response->kkt_residual);
        if (!c.error.empty()) rep.diagnostics.push_back(c.name + ": " + c.error + " (partial output)");
    }
    rep.exit_code = r.all_converged ? kExitOk : kExitSolver;
    w.summary(t0);
    return rep;
}

RunReport cmd_equilibrium(const RunOptions& opts) {
    const auto t0 = Clock::now();
    RunReport rep = start("equilibrium", opts);
    const ScenarioConfig cfg = load_scenario(opts.config, opts.overrides);
    const Scenario sc = cfg.equilibrium_scenario();
    EquilibriumOptions eo;
    eo.tol = cfg.solver.tol;
    eo.threads = opts.threads;
    const EquilibriumSolution sol = find_equilibrium_price(sc, eo);

    Writer w(opts, rep);
    const TimeGrid& grid = sc.grid;
    const Trajectory net = sc.classes.empty() ? sc.inflexible_load : sc.inflexible_load + sc.total_baseline();
    w.series("price.csv", grid, {"price"}, {sol.price.vector()});
    w.series("generation.csv", grid, {"generation", "inflexible_load", "net_baseline"},
             {sol.gen.vector(), sc.inflexible_load.vector(), net.vector()});
    if (!sc.classes.empty()) {
        std::vector<std::string> names;
        std::vector<std::vector<double>> devs, socs;
        for (std::size_t i = 0; i < sc.classes.size(); ++i) {
            names.push_back(sc.classes[i].name);
            devs.push_back(sol.devs[i].vector());
            socs.push_back(sol.socs[i].vector());
        }
        w.series("deviations.csv", grid, names, devs);
        w.series("soc.csv", grid, names, socs);
        const auto mv = check_marginal_value(sol, sc.classes);
        auto out = w.raw("marginal_value.csv");
        out << "class,step,hour,discrete,continuous\n";
        for (const auto& r : mv) {
            for (std::size_t j = 0; j < r.steps.size(); ++j)
                out << r.name << ',' << r.steps[j] << ',' << format_number(grid.time_hours(r.steps[j])) << ','
                    << format_number(r.discrete[j]) << ',' << format_number(r.continuous[j]) << '\n';
            rep.metrics.emplace_back("marginal_discrete_max_" + r.name, r.discrete_max);
            rep.metrics.emplace_back("marginal_continuous_max_" + r.name, r.continuous_max);
        }
    }
    write_convergence_log(opts.out_dir / "convergence.csv", sol.log);
    rep.outputs.push_back("convergence.csv");

    rep.metrics.insert(rep.metrics.begin(), {{"relative_gap", sol.relative_gap()},
                                             {"duality_gap", sol.duality_gap},
                                             {"balance_residual_gw", sol.balance_residual},
                                             {"max_price_jump", max_price_jump(sol.price)},
                                             {"dual_iterations", sol.iters},
                                             {"primal_cost", sol.primal_value}});
    if (!sol.converged) {
        rep.diagnostics.push_back("dual ascent did not reach tolerance; outputs are partial");
        rep.exit_code = kExitSolver;
    }
    w.summary(t0);
    return rep;
}

RunReport cmd_ensemble(const RunOptions& opts) {
    const auto t0 = Clock::now();
    RunReport rep = start("ensemble", opts);
    const ScenarioConfig cfg = load_scenario(opts.config, opts.overrides);
    if (!cfg.ensemble) throw ValidationError("ensemble command needs an \"ensemble\" section");
    const EnsembleConfig& ec = *cfg.ensemble;
    rep.seed = ec.seed;

    const EnsembleState initial = make_population(ec.population, ec.step_seconds, ec.seed);
    const int n_micro = static_cast<int>(std::lround(ec.hours * 3600.0 / ec.step_seconds));
    const double nominal = initial.nominal_power_kw();
    const double amplitude = ec.reference_fraction * nominal;
    std::vector<double> reference;
    if (ec.reference_csv.empty()) {
        reference = synthetic_reference(n_micro, ec.step_seconds, amplitude, ec.seed);
    } else {
        std::filesystem::path p = ec.reference_csv;
        if (p.is_relative()) p = cfg.base_dir / p;
        const TimeSeriesTable t = read_time_series(p, ec.step_seconds / 60.0);
        const int col = ec.reference_column.empty() ? 0 : t.column(ec.reference_column);
        reference = reference_from_series(t.hours, t.columns[static_cast<std::size_t>(col)], n_micro, ec.step_seconds,
                                          amplitude);
    }

    SimulationSpec spec;
    spec.hours = ec.hours;
    spec.macro_minutes = ec.macro_minutes;
    spec.sample_load = ec.sample_load;
    spec.threads = opts.threads;

    EnsembleState base_state = initial;
    const EnsembleRecord base = simulate(base_state, spec);

    EnsembleState track_state = initial;
    spec.baseline_kw = base.micro_power_kw;
    spec.reference_kw = reference;
    const EnsembleRecord track = simulate(track_state, spec);

    const LeakageFit fit = fit_leakage(initial, 0.2, 2.0, ec.hours, ec.macro_minutes, opts.threads);
    const MeanFieldReport mf = mean_field_check(track, fit.alpha);
    const MeanFieldReport mf_base = mean_field_check(base, fit.alpha);

    Writer w(opts, rep);
    const TimeGrid& grid = base.grid;
    w.series("baseline.csv", grid, {"power_kw", "soc", "input"}, {base.power_kw, base.soc, base.input});
    std::vector<double> dev(track.power_kw.size());
    for (std::size_t k = 0; k < dev.size(); ++k) dev[k] = track.power_kw[k] - track.baseline_kw[k];
    w.series("tracking.csv", grid, {"power_kw", "baseline_kw", "reference_kw", "deviation_kw", "soc", "model_soc", "input"},
             {track.power_kw, track.baseline_kw, track.reference_kw, dev, track.soc, mf.model_soc, track.input});
    const TimeGrid micro(ec.hours, ec.step_seconds / 60.0);
    w.series("sample_load.csv", micro, {"baseline_temp", "baseline_power_kw", "tracking_temp", "tracking_power_kw"},
             {base.sample_temp, base.sample_power_kw, track.sample_temp, track.sample_power_kw});
    w.series("tracking_micro.csv", micro, {"power_kw", "baseline_kw", "reference_kw", "error_kw"},
             {track.micro_power_kw, spec.baseline_kw, track.micro_reference_kw, track.micro_error_kw});

    double base_mean = 0.0, track_mean = 0.0;
    for (double p : base.micro_power_kw) base_mean += p;
    for (double p : track.micro_power_kw) track_mean += p;
    base_mean /= static_cast<double>(n_micro);
    track_mean /= static_cast<double>(n_micro);

    rep.metrics = {{"n_loads", static_cast<double>(ec.population.n_loads)},
                   {"nominal_power_kw", nominal},
                   {"baseline_mean_power_kw", base_mean},
                   {"tracking_mean_power_kw", track_mean},
                   {"tracking_nrmse", track.nrmse},
                   {"deadband_violations", static_cast<double>(track.deadband_violations + base.deadband_violations)},
                   {"max_excursion_degc", std::max(track.max_excursion, base.max_excursion)},
                   {"saturated_steps", static_cast<double>(track.saturated_steps)},
                   {"fitted_alpha", fit.alpha},
                   {"fitted_gain", fit.gain},
                   {"fit_r2", fit.r2},
                   {"mean_field_rms", mf.rms},
                   {"mean_field_max", mf.max},
                   {"mean_field_rms_baseline", mf_base.rms}};
    w.summary(t0);
    return rep;
}

}  // namespace gridce
