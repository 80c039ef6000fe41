#include "wqed/least_squares.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "wqed/errors.hpp"

namespace wqed {

double LeastSquaresResult::residual_rms() const {
  return residual_count > 0 ? std::sqrt(cost / residual_count) : 0.0;
}

Eigen::MatrixXd numerical_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& x,
                                   double relative_step) {
  const Eigen::VectorXd r0 = residuals(x);
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = relative_step * std::max(std::abs(x(k)), 1e-3);
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(k) += h;
    xm(k) -= h;
    jac.col(k) = (residuals(xp) - residuals(xm)) / (2.0 * h);
  }
  return jac;
}

LeastSquaresResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd x0,
                                       const LeastSquaresOptions& options,
                                       const std::string& what) {
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = residuals(x);
  const Eigen::Index m = r.size();
  const Eigen::Index n = x.size();
  require(m > n, ErrorKind::identifiability,
          what + ": fewer residuals than parameters");
  require(r.allFinite(), ErrorKind::fit_failure, what + ": non-finite residuals at the start point");

  double cost = r.squaredNorm();
  const double cost0 = cost;
  double damping = options.initial_damping;
  bool converged = false;
  int it = 0;
  for (; it < options.max_iterations && !converged; ++it) {
    const Eigen::MatrixXd jac = numerical_jacobian(residuals, x, options.relative_step);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += damping * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd dx = a.ldlt().solve(-grad);
      const Eigen::VectorXd xn = x + dx;
      const Eigen::VectorXd rn = residuals(xn);
      const double cn = rn.allFinite() ? rn.squaredNorm() : INFINITY;
      if (cn < cost) {
        const double rel = (cost - cn) / std::max(cost, 1e-300);
        x = xn;
        r = rn;
        cost = cn;
        damping = std::max(damping * 0.3, 1e-12);
        accepted = true;
        if (rel < options.cost_tolerance || cost <= 1e-28 * cost0) converged = true;
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted) {
      // No descent direction left: we are at a stationary point of the cost.
      converged = true;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << what << ": no convergence after " << options.max_iterations
       << " iterations (cost " << cost << ", start " << cost0 << ")";
    fail(ErrorKind::fit_failure, os.str());
  }

  const Eigen::MatrixXd jac = numerical_jacobian(residuals, x, options.relative_step);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv(n - 1) > 1e-10 * sv(0))) {
    fail(ErrorKind::identifiability, what + ": parameters are not identifiable from the data");
  }
  const Eigen::MatrixXd v = svd.matrixV();
  const Eigen::VectorXd inv_s2 = sv.cwiseAbs2().cwiseInverse();
  const Eigen::MatrixXd jtj_inv = v * inv_s2.asDiagonal() * v.transpose();

  LeastSquaresResult out;
  out.params = x;
  out.cost = cost;
  out.iterations = it;
  out.residual_count = static_cast<int>(m);
  out.covariance = (cost / static_cast<double>(m - n)) * jtj_inv;
  return out;
}

}  // namespace wqed
