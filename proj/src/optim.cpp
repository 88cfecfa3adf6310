#include "sigmaforge/optim.hpp"

#include "sigmaforge/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace sigmaforge {

namespace {

double safe_eval(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opts) {
  const Eigen::Index n = x0.size();
  if (n < 1) fail(ErrorKind::InvalidInput, "nelder_mead needs at least one variable");

  NelderMeadResult res;
  res.x = x0;
  res.value = safe_eval(f, x0);
  res.evals = 1;

  constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1));
  std::vector<double> vals(pts.size());
  std::vector<std::size_t> order(pts.size());

  for (int round = 0; round <= opts.restarts && res.evals < opts.max_evals; ++round) {
    pts[0] = res.x;
    vals[0] = res.value;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& p = pts[static_cast<std::size_t>(i + 1)];
      p = res.x;
      p[i] += opts.initial_step;
      vals[static_cast<std::size_t>(i + 1)] = safe_eval(f, p);
      ++res.evals;
    }

    bool converged = false;
    while (res.evals < opts.max_evals) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

      double diameter = 0.0;
      for (const auto& p : pts) diameter = std::max(diameter, (p - pts[best]).lpNorm<Eigen::Infinity>());
      const double spread = std::abs(vals[worst] - vals[best]);
      if (std::isfinite(vals[worst]) && spread <= opts.f_tol * (std::abs(vals[best]) + 1e-300) &&
          diameter <= opts.x_tol * (1.0 + pts[best].lpNorm<Eigen::Infinity>())) {
        converged = true;
        break;
      }
      if (diameter == 0.0) {
        converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (std::size_t k = 0; k < pts.size(); ++k)
        if (k != worst) centroid += pts[k];
      centroid /= static_cast<double>(n);

      const Eigen::VectorXd xr = centroid + reflect * (centroid - pts[worst]);
      const double fr = safe_eval(f, xr);
      ++res.evals;
      if (fr < vals[best]) {
        const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
        const double fe = safe_eval(f, xe);
        ++res.evals;
        if (fe < fr) {
          pts[worst] = xe;
          vals[worst] = fe;
        } else {
          pts[worst] = xr;
          vals[worst] = fr;
        }
        continue;
      }
      if (fr < vals[second]) {
        pts[worst] = xr;
        vals[worst] = fr;
        continue;
      }
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc =
          outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                  : Eigen::VectorXd(centroid + contract * (pts[worst] - centroid));
      const double fc = safe_eval(f, xc);
      ++res.evals;
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
        continue;
      }
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (k == best) continue;
        pts[k] = pts[best] + shrink * (pts[k] - pts[best]);
        vals[k] = safe_eval(f, pts[k]);
        ++res.evals;
      }
    }

    const auto it = std::min_element(vals.begin(), vals.end());
    const auto k = static_cast<std::size_t>(it - vals.begin());
    const bool improved = *it < res.value;
    if (*it <= res.value) {
      res.x = pts[k];
      res.value = *it;
    }
    res.converged = converged;
    if (round > 0 && !improved) break;
  }
  return res;
}

OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double max_condition, bool want_covariance) {
  if (X.rows() != y.size()) fail(ErrorKind::Shape, "design rows and response length differ");
  if (X.rows() < X.cols()) fail(ErrorKind::InsufficientData, "fewer observations than regressors");
  if (!X.allFinite() || !y.allFinite()) fail(ErrorKind::NonFinite, "regression inputs must be finite");

  const Eigen::RowVectorXd norms = X.colwise().norm();
  if ((norms.array() == 0.0).any()) fail(ErrorKind::SingularDesign, "design has an all-zero column");
  const Eigen::MatrixXd Xn = X * norms.cwiseInverse().asDiagonal();
  const Eigen::VectorXd sv = Xn.jacobiSvd().singularValues();
  const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition))
    fail(ErrorKind::SingularDesign, "design condition number " + std::to_string(cond) + " exceeds limit");

  OlsResult out;
  out.coef = X.colPivHouseholderQr().solve(y);
  out.residuals = y - X * out.coef;
  const double tss = (y.array() - y.mean()).square().sum();
  const double rss = out.residuals.squaredNorm();
  out.r2 = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : 0.0);
  if (want_covariance) {
    const Eigen::MatrixXd xtx = X.transpose() * X;
    out.xtx_inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  }
  return out;
}

}  // namespace sigmaforge
