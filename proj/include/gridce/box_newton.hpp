#pragma once

// Projected Newton method for smooth convex objectives under box constraints
// (Bertsekas-style: epsilon-active set, reduced Newton step on the free
// variables, Armijo search along the projection arc).

#include <Eigen/Dense>
#include <vector>

namespace gridce {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class BoxObjective {
public:
    virtual ~BoxObjective() = default;

    virtual int size() const = 0;
    virtual double value(const Vec& z) = 0;
    virtual double value_gradient(const Vec& z, Vec& grad) = 0;

    // Builds the second-order model at z. Called once per iteration before
    // curvature_diag / solve_free.
    virtual void set_curvature_point(const Vec& z) = 0;
    virtual double curvature_diag(int i) const = 0;
    // Solves (H_FF + mu I) p_F = rhs_F. Entries of p outside the free set are
    // left untouched. Returns false if the reduced matrix is not positive
    // definite at this mu.
    virtual bool solve_free(const std::vector<char>& is_free, double mu, const Vec& rhs, Vec& p) = 0;
};

// Objective with an explicit dense Hessian; the reduced system is factorized
// with a Cholesky decomposition.
class DenseBoxObjective : public BoxObjective {
public:
    virtual void hessian(const Vec& z, Mat& h) = 0;

    void set_curvature_point(const Vec& z) override;
    double curvature_diag(int i) const override { return hess_(i, i); }
    bool solve_free(const std::vector<char>& is_free, double mu, const Vec& rhs, Vec& p) override;

    const Mat& cached_hessian() const noexcept { return hess_; }

private:
    Mat hess_;
    Mat reduced_;
    std::vector<int> idx_;
};

struct BoxNewtonOptions {
    double tol = 1e-6;          // on the scaled projected-gradient residual
    double grad_scale = 1.0;    // gradient magnitude the residual is divided by
    int max_iters = 50000;
};

struct BoxNewtonResult {
    Vec z;
    double value = 0.0;
    double residual = 0.0;      // scaled projected-gradient residual at z
    int iters = 0;
    bool converged = false;
};

// ||z - P(z - grad)||_inf, the first-order optimality measure for boxes.
double projected_gradient_residual(const Vec& z, const Vec& grad, const Vec& lo, const Vec& hi);

BoxNewtonResult minimize_box(BoxObjective& f, const Vec& lo, const Vec& hi, const Vec& start,
                             const BoxNewtonOptions& opts);

}  // namespace gridce
