#include "gridce/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridce/parallel.hpp"

namespace gridce {

namespace {

constexpr std::size_t kChunk = 8192;

enum Stream : std::uint64_t { kDrawStart = 0, kFlip = 1, kInit = 2 };

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform on [0, 1) keyed by (seed, load, step, stream).
double uniform(std::uint64_t seed, std::uint64_t load, std::uint64_t step, std::uint64_t stream) {
    const std::uint64_t h = mix(mix(mix(seed) ^ load) ^ (step * 8 + stream));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double normal(std::uint64_t seed, std::uint64_t load, std::uint64_t salt) {
    const double u1 = uniform(seed, load, salt, kInit);
    const double u2 = uniform(seed, load, salt + 1, kInit);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Partial sums over fixed chunks, combined in chunk order, so the result is
// independent of the worker count.
struct Sums {
    double power = 0.0;
    double input = 0.0;
    double cap_on = 0.0;   // rated power of idle loads strictly inside the band
    double cap_off = 0.0;  // rated power of heating loads strictly inside the band
    double excursion = 0.0;
    long violations = 0;
};

template <class Fn>
Sums chunked(std::size_t n, int threads, Fn&& fn) {
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<Sums> part(chunks);
    parallel_for(static_cast<int>(chunks), threads, [&](int c) {
        const std::size_t b = static_cast<std::size_t>(c) * kChunk;
        part[static_cast<std::size_t>(c)] = fn(b, std::min(n, b + kChunk));
    });
    Sums s;
    for (const auto& p : part) {
        s.power += p.power;
        s.input += p.input;
        s.cap_on += p.cap_on;
        s.cap_off += p.cap_off;
        s.excursion = std::max(s.excursion, p.excursion);
        s.violations += p.violations;
    }
    return s;
}

double normalized_input(const ThermostaticLoad& l) {
    return l.heat_rate * ((l.on ? 1.0 : 0.0) - l.nominal_duty()) / l.deadband;
}

// One Euler step of the thermal model and the draw process, followed by the
// thermostat. Accumulates the consumption and input of the step into `s`.
void advance(ThermostaticLoad& l, std::uint64_t seed, std::uint64_t index, std::uint64_t step, double h, Sums& s) {
    s.power += l.on ? l.rated_kw : 0.0;
    s.input += normalized_input(l);
    bool drawing = false;
    if (l.draw_left > 0) {
        drawing = true;
        --l.draw_left;
    } else if (l.draw_prob > 0.0 && uniform(seed, index, step, kDrawStart) < l.draw_prob) {
        drawing = true;
        l.draw_left = l.draw_steps - 1;
    }
    const double rate = -(l.temp - l.ambient) / l.tau_hours + (l.on ? l.heat_rate : 0.0) - (drawing ? l.draw_cooling : 0.0);
    l.temp += h * rate;
    if (l.temp <= l.lower()) l.on = true;
    else if (l.temp >= l.upper()) l.on = false;

    const double out = std::max(l.lower() - l.temp, l.temp - l.upper());
    if (out > 0.0) {
        s.excursion = std::max(s.excursion, out);
        const double drift = h * (l.heat_rate + l.draw_cooling + std::abs(l.temp - l.ambient) / l.tau_hours);
        if (out > drift) ++s.violations;
    }
}

}  // namespace

double ThermostaticLoad::mean_draw_rate() const noexcept {
    // Stationary busy fraction of the idle/draw chain: q L / (q L + 1 - q).
    const double ql = draw_prob * draw_steps;
    return draw_cooling * ql / (ql + 1.0 - draw_prob);
}

double ThermostaticLoad::nominal_duty() const noexcept {
    return ((setpoint - ambient) / tau_hours + mean_draw_rate()) / heat_rate;
}

double EnsembleState::power_kw() const noexcept {
    double p = 0.0;
    for (const auto& l : loads) p += l.on ? l.rated_kw : 0.0;
    return p;
}

double EnsembleState::nominal_power_kw() const noexcept {
    double p = 0.0;
    for (const auto& l : loads) p += l.rated_kw * l.nominal_duty();
    return p;
}

double EnsembleState::mean_soc() const noexcept {
    if (loads.empty()) return 0.0;
    double x = 0.0;
    for (const auto& l : loads) x += (l.temp - l.setpoint) / l.deadband;
    return x / static_cast<double>(loads.size());
}

double EnsembleState::mean_input() const noexcept {
    if (loads.empty()) return 0.0;
    double u = 0.0;
    for (const auto& l : loads) u += normalized_input(l);
    return u / static_cast<double>(loads.size());
}

EnsembleState make_population(const PopulationParams& p, double step_seconds, std::uint64_t seed) {
    if (p.n_loads < 1) throw ValidationError("ensemble: need at least one load");
    if (!(step_seconds > 0.0)) throw ValidationError("ensemble: step must be positive");
    if (!(p.deadband > 0.0) || !(p.rated_kw > 0.0) || !(p.tau_hours > 0.0) || !(p.heat_rate > 0.0))
        throw ValidationError("ensemble: deadband, rated power, time constant and heat rate must be positive");
    const double h = step_seconds / 3600.0;
    EnsembleState st;
    st.step_seconds = step_seconds;
    st.rng_seed = seed;
    st.loads.resize(static_cast<std::size_t>(p.n_loads));
    const double sigma = p.heterogeneity;
    // Log-normal spread truncated at two standard deviations.
    auto spread = [&](std::size_t i, std::uint64_t salt) {
        return std::exp(sigma * std::clamp(normal(seed, i, salt), -2.0, 2.0));
    };
    for (std::size_t i = 0; i < st.loads.size(); ++i) {
        ThermostaticLoad& l = st.loads[i];
        l.setpoint = p.setpoint;
        l.deadband = p.deadband;
        l.ambient = p.ambient;
        l.tau_hours = p.tau_hours * spread(i, 10);
        l.rated_kw = p.rated_kw * spread(i, 12);
        l.heat_rate = p.heat_rate * spread(i, 14);
        l.draw_cooling = p.draw_cooling;
        l.draw_prob = std::min(1.0, p.draws_per_day / 24.0 * h);
        l.draw_steps = std::max(1, static_cast<int>(std::lround(p.draw_minutes * 60.0 / step_seconds)));
        const double duty = l.nominal_duty();
        if (!(duty > 0.0 && duty < 1.0))
            throw ValidationError("ensemble: heat rate cannot balance standby and draw losses");

        l.temp = l.lower() + l.deadband * uniform(seed, i, 20, kInit);
        l.on = uniform(seed, i, 21, kInit) < duty;
        const double busy = l.mean_draw_rate() / std::max(l.draw_cooling, 1e-300);
        if (uniform(seed, i, 22, kInit) < busy)
            l.draw_left = 1 + static_cast<int>(uniform(seed, i, 23, kInit) * l.draw_steps) % l.draw_steps;
    }
    return st;
}

StepOutput step_baseline(EnsembleState& st, int threads) {
    const std::uint64_t step = static_cast<std::uint64_t>(st.step_index);
    const double h = st.dt_hours();
    Sums s = chunked(st.loads.size(), threads, [&](std::size_t b, std::size_t e) {
        Sums part;
        for (std::size_t i = b; i < e; ++i) advance(st.loads[i], st.rng_seed, i, step, h, part);
        return part;
    });
    ++st.step_index;
    const double n = static_cast<double>(std::max<std::size_t>(1, st.loads.size()));
    return StepOutput{s.power, s.input / n, false, s.excursion, s.violations};
}

StepOutput step_tracking(EnsembleState& st, double baseline_kw, double reference_kw, const TrackingOptions& opts,
                         int threads) {
    if (!(opts.p_max > 0.0 && opts.p_max <= 1.0)) throw ValidationError("tracking: p_max must be in (0, 1]");
    const std::uint64_t step = static_cast<std::uint64_t>(st.step_index);
    const double h = st.dt_hours();
    const Sums pre = chunked(st.loads.size(), threads, [&](std::size_t b, std::size_t e) {
        Sums part;
        for (std::size_t i = b; i < e; ++i) {
            const ThermostaticLoad& l = st.loads[i];
            const bool inside = l.temp > l.lower() && l.temp < l.upper();
            if (l.on) {
                part.power += l.rated_kw;
                if (inside) part.cap_off += l.rated_kw;
            } else if (inside) {
                part.cap_on += l.rated_kw;
            }
        }
        return part;
    });
    const double error = baseline_kw + reference_kw - pre.power;
    const bool up = error > 0.0;
    const double cap = up ? pre.cap_on : pre.cap_off;
    const bool saturated = std::abs(error) > cap;
    const double prob = cap > 0.0 ? std::clamp(std::abs(error) / cap, 0.0, opts.p_max) : 0.0;

    Sums s = chunked(st.loads.size(), threads, [&](std::size_t b, std::size_t e) {
        Sums part;
        for (std::size_t i = b; i < e; ++i) {
            ThermostaticLoad& l = st.loads[i];
            const bool inside = l.temp > l.lower() && l.temp < l.upper();
            if (prob > 0.0 && inside && l.on != up && uniform(st.rng_seed, i, step, kFlip) < prob) l.on = up;
            advance(l, st.rng_seed, i, step, h, part);
        }
        return part;
    });
    ++st.step_index;
    const double n = static_cast<double>(std::max<std::size_t>(1, st.loads.size()));
    return StepOutput{s.power, s.input / n, saturated, s.excursion, s.violations};
}

EnsembleRecord simulate(EnsembleState& st, const SimulationSpec& spec) {
    const double micro_per_macro_f = spec.macro_minutes * 60.0 / st.step_seconds;
    const int per_macro = static_cast<int>(std::lround(micro_per_macro_f));
    if (per_macro < 1 || std::abs(micro_per_macro_f - per_macro) > 1e-9)
        throw ValidationError("ensemble: macro step must be a multiple of the micro step");
    const TimeGrid grid(spec.hours, spec.macro_minutes);
    const int n_macro = grid.n_steps();
    const int n_micro = n_macro * per_macro;
    const bool tracking = !spec.reference_kw.empty();
    if (tracking && (static_cast<int>(spec.reference_kw.size()) != n_micro ||
                     static_cast<int>(spec.baseline_kw.size()) != n_micro))
        throw DimensionError("ensemble: reference and baseline need one sample per micro step");
    if (spec.sample_load < 0 || spec.sample_load >= static_cast<int>(st.loads.size()))
        throw ValidationError("ensemble: sample load out of range");

    EnsembleRecord rec{grid, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, 0.0, 0, 0, 0.0};
    rec.sample_temp.reserve(static_cast<std::size_t>(n_micro));
    rec.sample_power_kw.reserve(static_cast<std::size_t>(n_micro));
    rec.micro_power_kw.reserve(static_cast<std::size_t>(n_micro));
    double ss_err = 0.0;
    for (int k = 0; k < n_macro; ++k) {
        rec.soc.push_back(st.mean_soc());
        double p = 0.0, u = 0.0, b = 0.0, r = 0.0;
        for (int j = 0; j < per_macro; ++j) {
            const std::size_t n = static_cast<std::size_t>(k * per_macro + j);
            const ThermostaticLoad& sl = st.loads[static_cast<std::size_t>(spec.sample_load)];
            rec.sample_temp.push_back(sl.temp);
            rec.sample_power_kw.push_back(sl.on ? sl.rated_kw : 0.0);
            StepOutput o;
            if (tracking) {
                o = step_tracking(st, spec.baseline_kw[n], spec.reference_kw[n], spec.tracking, spec.threads);
                const double err = o.power_kw - spec.baseline_kw[n] - spec.reference_kw[n];
                rec.micro_error_kw.push_back(err);
                rec.micro_reference_kw.push_back(spec.reference_kw[n]);
                ss_err += err * err;
                b += spec.baseline_kw[n];
                r += spec.reference_kw[n];
                if (o.saturated) ++rec.saturated_steps;
            } else {
                o = step_baseline(st, spec.threads);
            }
            rec.micro_power_kw.push_back(o.power_kw);
            rec.deadband_violations += o.violations;
            rec.max_excursion = std::max(rec.max_excursion, o.max_excursion);
            p += o.power_kw;
            u += o.input;
        }
        rec.power_kw.push_back(p / per_macro);
        rec.input.push_back(u / per_macro);
        rec.baseline_kw.push_back(tracking ? b / per_macro : p / per_macro);
        rec.reference_kw.push_back(r / per_macro);
    }
    if (tracking) {
        const auto [mn, mx] = std::minmax_element(spec.reference_kw.begin(), spec.reference_kw.end());
        const double range = *mx - *mn;
        const double rms = std::sqrt(ss_err / n_micro);
        rec.nrmse = range > 0.0 ? rms / range : rms;
    }
    return rec;
}

std::vector<double> synthetic_reference(int n, double step_seconds, double amplitude, std::uint64_t seed) {
    constexpr int kModes = 12;
    const double h = step_seconds / 3600.0;
    double period[kModes], phase[kModes], weight[kModes];
    for (int m = 0; m < kModes; ++m) {
        // Periods log-spaced between 10 minutes and 3 hours, jittered.
        const double f = (m + uniform(seed, 7, static_cast<std::uint64_t>(m), kInit)) / kModes;
        period[m] = (10.0 / 60.0) * std::pow(3.0 / (10.0 / 60.0), f);
        phase[m] = 2.0 * std::numbers::pi * uniform(seed, 8, static_cast<std::uint64_t>(m), kInit);
        weight[m] = std::sqrt(period[m]) * (0.5 + uniform(seed, 9, static_cast<std::uint64_t>(m), kInit));
    }
    std::vector<double> v(static_cast<std::size_t>(n));
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = i * h;
        double s = 0.0;
        for (int m = 0; m < kModes; ++m) s += weight[m] * std::sin(2.0 * std::numbers::pi * t / period[m] + phase[m]);
        v[static_cast<std::size_t>(i)] = s;
        peak = std::max(peak, std::abs(s));
    }
    if (peak > 0.0)
        for (double& x : v) x *= amplitude / peak;
    return v;
}

std::vector<double> reference_from_series(std::span<const double> hours, std::span<const double> mw, int n,
                                          double step_seconds, double amplitude_kw) {
    if (hours.size() != mw.size() || hours.empty()) throw DimensionError("reference: need matching non-empty columns");
    const double h = step_seconds / 3600.0;
    std::vector<double> v(static_cast<std::size_t>(n));
    std::size_t j = 0;
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = i * h;
        while (j + 1 < hours.size() && hours[j + 1] <= t) ++j;
        v[static_cast<std::size_t>(i)] = mw[j];
        peak = std::max(peak, std::abs(mw[j]));
    }
    for (double& x : v) x = peak > 0.0 ? x * amplitude_kw / peak : 0.0;
    return v;
}

LeakageFit fit_leakage(std::span<const double> soc, std::span<const double> input, double dt) {
    if (soc.size() != input.size() || soc.size() < 3) throw DimensionError("fit_leakage: need matching series of length >= 3");
    const std::size_t m = soc.size() - 1;
    double umean = 0.0;
    for (std::size_t k = 0; k < m; ++k) umean += input[k];
    umean /= static_cast<double>(m);
    double uvar = 0.0, uscale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        uvar += (input[k] - umean) * (input[k] - umean);
        uscale = std::max(uscale, std::abs(input[k]));
    }
    if (!(uvar > 1e-12 * std::max(1e-300, uscale * uscale) * static_cast<double>(m)))
        throw ValidationError("fit_leakage: constant probe, leakage rate is not identifiable");

    double sxx = 0.0, sxu = 0.0, suu = 0.0, sxy = 0.0, suy = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double x = soc[k], u = input[k], y = soc[k + 1];
        sxx += x * x;
        sxu += x * u;
        suu += u * u;
        sxy += x * y;
        suy += u * y;
    }
    const double det = sxx * suu - sxu * sxu;
    if (!(std::abs(det) > 0.0)) throw ValidationError("fit_leakage: regressors are collinear, leakage rate is not identifiable");
    const double a = (sxy * suu - suy * sxu) / det;
    const double b = (suy * sxx - sxy * sxu) / det;
    if (!(a > 0.0)) throw ValidationError("fit_leakage: fitted decay is not positive");

    LeakageFit fit;
    fit.alpha = std::max(0.0, -std::log(a) / dt);
    const double gain_unit = fit.alpha > 0.0 ? (1.0 - a) / fit.alpha : dt;
    fit.gain = b / gain_unit;

    double mean = 0.0;
    for (double x : soc) mean += x;
    mean /= static_cast<double>(soc.size());
    double ss_res = 0.0, ss_tot = 0.0, x = soc[0];
    for (std::size_t k = 0; k < soc.size(); ++k) {
        ss_res += (x - soc[k]) * (x - soc[k]);
        ss_tot += (soc[k] - mean) * (soc[k] - mean);
        if (k < m) x = a * x + b * input[k];
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return fit;
}

LeakageFit fit_leakage(const EnsembleState& state, double probe_fraction, double period_hours, double hours,
                       double macro_minutes, int threads) {
    if (!(probe_fraction > 0.0)) throw ValidationError("fit_leakage: probe amplitude must be positive");
    if (!(period_hours > 0.0)) throw ValidationError("fit_leakage: probe period must be positive");
    EnsembleState st = state;
    const int n = static_cast<int>(std::lround(hours * 3600.0 / st.step_seconds));
    const double nominal = st.nominal_power_kw();
    SimulationSpec spec;
    spec.hours = hours;
    spec.macro_minutes = macro_minutes;
    spec.threads = threads;
    spec.baseline_kw.assign(static_cast<std::size_t>(n), nominal);
    spec.reference_kw.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = i * st.dt_hours();
        const bool high = std::fmod(t, period_hours) < 0.5 * period_hours;
        spec.reference_kw[static_cast<std::size_t>(i)] = (high ? 1.0 : -1.0) * probe_fraction * nominal;
    }
    const EnsembleRecord rec = simulate(st, spec);
    return fit_leakage(rec.soc, rec.input, rec.grid.dt_hours());
}

MeanFieldReport mean_field_check(const EnsembleRecord& rec, double alpha) {
    if (!(alpha >= 0.0)) throw ValidationError("mean_field_check: alpha must be >= 0");
    if (rec.soc.size() != rec.input.size() || rec.soc.empty()) throw DimensionError("mean_field_check: empty record");
    const auto [a, gamma] = soc_step(alpha, rec.grid.dt_hours());
    MeanFieldReport out;
    out.model_soc.resize(rec.soc.size());
    double x = rec.soc[0], ss = 0.0;
    for (std::size_t k = 0; k < rec.soc.size(); ++k) {
        out.model_soc[k] = x;
        const double e = std::abs(x - rec.soc[k]);
        ss += e * e;
        out.max = std::max(out.max, e);
        x = a * x + gamma * rec.input[k];
    }
    out.rms = std::sqrt(ss / static_cast<double>(rec.soc.size()));
    return out;
}

}  // namespace gridce
