// Dense Levenberg-Marquardt for small nonlinear least-squares problems.
// Internal to the core library; the spectral fits are the public surface.
#pragma once

#include <Eigen/Dense>
#include <functional>

namespace driftlock::detail {

struct LevMarOptions {
    int max_iterations = 200;
    double initial_lambda = 1e-3;
    double lambda_factor = 10.0; // multiplicative damping adjustment
    double step_tolerance = 1e-10;
    double ssr_tolerance = 1e-12; // relative SSR improvement considered converged
};

struct LevMarResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance; // s^2 (J^T J)^-1 at the solution
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Callback fills the residual vector and its Jacobian at `params`.
using ResidualFn =
    std::function<void(const Eigen::VectorXd& params, Eigen::VectorXd& residuals, Eigen::MatrixXd& jacobian)>;

LevMarResult levmar(const ResidualFn& fn, Eigen::VectorXd initial, int n_residuals,
                    const LevMarOptions& options = {});

} // namespace driftlock::detail
