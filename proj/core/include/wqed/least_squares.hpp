#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace wqed {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LeastSquaresOptions {
  int max_iterations = 200;
  double relative_step = 1e-6;     // finite-difference step relative to |x_i|
  double cost_tolerance = 1e-10;   // relative cost change that counts as converged
  double initial_damping = 1e-3;
};

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1 with s^2 = sum(r^2) / (m - n)
  double cost = 0.0;           // sum of squared residuals
  int iterations = 0;
  int residual_count = 0;

  Eigen::VectorXd errors() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
  double residual_rms() const;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) with central-difference Jacobians.
/// Throws ErrorKind::fit_failure when it does not converge and
/// ErrorKind::identifiability when J^T J is numerically singular at the solution.
LeastSquaresResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd x0,
                                       const LeastSquaresOptions& options = {},
                                       const std::string& what = "fit");

Eigen::MatrixXd numerical_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& x,
                                   double relative_step);

}  // namespace wqed
