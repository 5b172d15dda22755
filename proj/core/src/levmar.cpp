#include "levmar.hpp"

#include <cmath>

namespace driftlock::detail {

LevMarResult levmar(const ResidualFn& fn, Eigen::VectorXd initial, int n_residuals,
                    const LevMarOptions& options) {
    const auto p = static_cast<int>(initial.size());
    Eigen::VectorXd params = std::move(initial);
    Eigen::VectorXd residuals(n_residuals);
    Eigen::MatrixXd jacobian(n_residuals, p);

    fn(params, residuals, jacobian);
    double ssr = residuals.squaredNorm();
    double lambda = options.initial_lambda;

    LevMarResult result;
    result.converged = false;

    Eigen::VectorXd trial_params(p);
    Eigen::VectorXd trial_residuals(n_residuals);
    Eigen::MatrixXd trial_jacobian(n_residuals, p);

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
        Eigen::VectorXd gradient = jacobian.transpose() * residuals;

        // Marquardt scaling: damp along the diagonal of J^T J.
        Eigen::MatrixXd damped = jtj;
        for (int i = 0; i < p; ++i) {
            double d = jtj(i, i);
            damped(i, i) += lambda * (d > 0.0 ? d : 1.0);
        }
        Eigen::VectorXd step = damped.ldlt().solve(-gradient);
        if (!step.allFinite()) {
            lambda *= options.lambda_factor;
            if (lambda > 1e16) break;
            continue;
        }

        const double step_scale = step.norm() / (params.norm() + options.step_tolerance);
        trial_params = params + step;
        fn(trial_params, trial_residuals, trial_jacobian);
        const double trial_ssr = trial_residuals.squaredNorm();

        if (std::isfinite(trial_ssr) && trial_ssr < ssr) {
            const double improvement = (ssr - trial_ssr) / (ssr + options.step_tolerance);
            params = trial_params;
            residuals = trial_residuals;
            jacobian = trial_jacobian;
            ssr = trial_ssr;
            lambda /= options.lambda_factor;
            if (step_scale < options.step_tolerance || improvement < options.ssr_tolerance) {
                result.converged = true;
                ++iter;
                break;
            }
        } else {
            lambda *= options.lambda_factor;
            // Once damping has shrunk the step below tolerance there is no
            // downhill direction left at this scale.
            if (step_scale < options.step_tolerance || lambda > 1e16) {
                result.converged = true;
                ++iter;
                break;
            }
        }
    }

    result.params = params;
    result.ssr = ssr;
    result.iterations = iter;

    Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
    const int dof = n_residuals - p;
    Eigen::MatrixXd inv = jtj.completeOrthogonalDecomposition().pseudoInverse();
    const double s2 = dof > 0 ? ssr / dof : 0.0;
    result.covariance = s2 * inv;
    return result;
}

} // namespace driftlock::detail
