#include "gridce/box_newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridce {

void DenseBoxObjective::set_curvature_point(const Vec& z) {
    hessian(z, hess_);
}

bool DenseBoxObjective::solve_free(const std::vector<char>& is_free, double mu, const Vec& rhs, Vec& p) {
    idx_.clear();
    for (int i = 0; i < static_cast<int>(is_free.size()); ++i)
        if (is_free[static_cast<std::size_t>(i)]) idx_.push_back(i);
    const int m = static_cast<int>(idx_.size());
    if (m == 0) return true;
    reduced_.resize(m, m);
    Vec b(m);
    for (int a = 0; a < m; ++a) {
        b(a) = rhs(idx_[static_cast<std::size_t>(a)]);
        for (int c = 0; c < m; ++c) reduced_(a, c) = hess_(idx_[static_cast<std::size_t>(a)], idx_[static_cast<std::size_t>(c)]);
        reduced_(a, a) += mu;
    }
    Eigen::LLT<Mat> llt(reduced_);
    if (llt.info() != Eigen::Success) return false;
    const Vec x = llt.solve(b);
    if (!x.allFinite()) return false;
    for (int a = 0; a < m; ++a) p(idx_[static_cast<std::size_t>(a)]) = x(a);
    return true;
}

double projected_gradient_residual(const Vec& z, const Vec& grad, const Vec& lo, const Vec& hi) {
    double r = 0.0;
    for (int i = 0; i < z.size(); ++i) {
        const double proj = std::clamp(z(i) - grad(i), lo(i), hi(i));
        r = std::max(r, std::abs(z(i) - proj));
    }
    return r;
}

namespace {

Vec project(const Vec& z, const Vec& lo, const Vec& hi) {
    return z.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

BoxNewtonResult minimize_box(BoxObjective& f, const Vec& lo, const Vec& hi, const Vec& start,
                             const BoxNewtonOptions& opts) {
    const int n = f.size();
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxHalvings = 60;

    BoxNewtonResult out;
    Vec z = project(start, lo, hi);
    Vec g(n);
    double fz = f.value_gradient(z, g);
    const double scale = opts.grad_scale > 0.0 ? opts.grad_scale : 1.0;

    std::vector<char> is_free(static_cast<std::size_t>(n));
    Vec p(n), trial(n), g_trial(n);

    double damping = 0.0;  // Levenberg-style, relative to the largest curvature
    int it = 0;
    double res = projected_gradient_residual(z, g, lo, hi) / scale;
    for (; it < opts.max_iters && res > opts.tol; ++it) {
        f.set_curvature_point(z);

        double max_diag = 0.0;
        for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(f.curvature_diag(i)));
        const double diag_floor = 1e-12 * std::max(1.0, max_diag);

        // Newton-scaled distance to stationarity decides the epsilon-active set.
        double w = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = std::max(f.curvature_diag(i), diag_floor);
            w = std::max(w, std::abs(z(i) - std::clamp(z(i) - g(i) / d, lo(i), hi(i))));
        }
        for (int i = 0; i < n; ++i) {
            const double width = std::isfinite(hi(i) - lo(i)) ? hi(i) - lo(i) : 1.0;
            const double eps = std::min(w, 1e-3 * width);
            const bool at_lo = z(i) <= lo(i) + eps && g(i) > 0.0;
            const bool at_hi = z(i) >= hi(i) - eps && g(i) < 0.0;
            is_free[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
        }

        const double mu_floor = 1e-14 * std::max(1.0, max_diag);
        double mu = std::max(damping * max_diag, mu_floor);
        const Vec neg_g = -g;
        bool ok = false;
        for (int pass = 0; pass < 8; ++pass) {
            ok = false;
            for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
                ok = f.solve_free(is_free, mu, neg_g, p);
                if (!ok) mu = std::max(mu * 100.0, 1e-10 * std::max(1.0, max_diag));
            }
            if (!ok) break;
            // A free variable sitting on a bound that the step pushes outward
            // would only be clipped by the projection; fix it and re-solve.
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                if (!is_free[static_cast<std::size_t>(i)]) continue;
                if ((z(i) <= lo(i) && p(i) < 0.0) || (z(i) >= hi(i) && p(i) > 0.0)) {
                    is_free[static_cast<std::size_t>(i)] = 0;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        if (!ok) break;
        for (int i = 0; i < n; ++i)
            if (!is_free[static_cast<std::size_t>(i)]) p(i) = -g(i) / std::max(f.curvature_diag(i), diag_floor);

        const double noise = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fz));
        double s = 1.0;
        bool accepted = false;
        double f_trial = fz;
        for (int h = 0; h < kMaxHalvings; ++h, s *= 0.5) {
            trial = project(z + s * p, lo, hi);
            const double predicted = -g.dot(trial - z);
            if (predicted <= noise) continue;
            f_trial = f.value(trial);
            if (std::isfinite(f_trial) && fz - f_trial >= kArmijo * predicted && f_trial <= fz) {
                accepted = true;
                break;
            }
        }
        if (accepted && s < 0.1) damping = std::max(1e-12, damping * 10.0);
        else if (accepted && s == 1.0) damping = damping < 1e-12 ? 0.0 : damping * 0.1;
        if (!accepted) {
            // At the rounding floor of f: take the longest step along the arc
            // that improves first-order optimality.
            double res_trial = INFINITY;
            for (s = 1.0; s > 1e-3; s *= 0.5) {
                trial = project(z + s * p, lo, hi);
                f_trial = f.value_gradient(trial, g_trial);
                res_trial = projected_gradient_residual(trial, g_trial, lo, hi) / scale;
                if (res_trial < res && std::isfinite(f_trial)) break;
            }
            if (!(res_trial < res) || !std::isfinite(f_trial)) {
                if (damping >= 1e4) break;
                damping = std::max(1e-8, damping * 10.0);
                continue;
            }
            z = trial;
            fz = f_trial;
            g = g_trial;
            res = res_trial;
            continue;
        }
        z = trial;
        fz = f.value_gradient(z, g);
        res = projected_gradient_residual(z, g, lo, hi) / scale;
    }

    out.z = std::move(z);
    out.value = fz;
    out.residual = res;
    out.iters = it;
    out.converged = res <= opts.tol;
    return out;
}

}  // namespace gridce
