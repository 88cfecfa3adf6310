#pragma once

#include <Eigen/Core>

#include <functional>

namespace sigmaforge {

struct NelderMeadOptions {
  double initial_step = 0.1;  // simplex edge along each axis
  double f_tol = 1e-12;       // relative spread of simplex values
  double x_tol = 1e-9;        // simplex diameter
  int max_evals = 20000;
  int restarts = 2;           // rebuild the simplex around the optimum and continue
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Derivative-free minimisation. Non-finite objective values are treated as
/// +infinity, so infeasible regions can be signalled by returning NaN.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opts = {});

struct OlsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  double r2 = 0.0;
  /// (X'X)^-1; left empty unless requested.
  Eigen::MatrixXd xtx_inv;
};

/// Least squares of y on the columns of X. Raises SingularDesign when the
/// column-normalised design has condition number above `max_condition`.
OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double max_condition = 1e10,
              bool want_covariance = false);

}  // namespace sigmaforge
