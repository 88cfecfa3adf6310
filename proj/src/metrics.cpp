#include "sigmaforge/metrics.hpp"

#include "sigmaforge/error.hpp"
#include "sigmaforge/optim.hpp"

#include <cmath>
#include <numbers>

namespace sigmaforge {

namespace {

void check_aligned(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) fail(ErrorKind::Shape, "series lengths differ");
  if (a.size() < 1) fail(ErrorKind::InsufficientData, "metrics need at least one point");
  if (!a.allFinite() || !b.allFinite()) fail(ErrorKind::NonFinite, "metric inputs must be finite");
}

void check_positive_truth(const Eigen::Ref<const Eigen::VectorXd>& truth) {
  if (!(truth.array() > 0.0).all()) fail(ErrorKind::Degenerate, "truth contains non-positive values");
}

}  // namespace

double mae(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  check_aligned(truth, forecast);
  return (forecast - truth).cwiseAbs().mean();
}

double rmse(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  check_aligned(truth, forecast);
  return std::sqrt((forecast - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double hrmse(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  check_aligned(truth, forecast);
  check_positive_truth(truth);
  return std::sqrt((1.0 - forecast.array() / truth.array()).square().mean());
}

double qlike(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  check_aligned(truth, forecast);
  check_positive_truth(truth);
  return (truth.array().log() + forecast.array() / truth.array()).mean();
}

PointMetrics point_metrics(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  PointMetrics m;
  m.mae = mae(truth, forecast);
  m.rmse = rmse(truth, forecast);
  if ((truth.array() > 0.0).all()) {
    m.hrmse = hrmse(truth, forecast);
    m.qlike = qlike(truth, forecast);
  }
  return m;
}

PointMetrics point_metrics(const VolSeries& truth, const VolSeries& forecast) {
  if (truth.index() != forecast.index()) fail(ErrorKind::Shape, "truth and forecast are not aligned");
  return point_metrics(truth.values(), forecast.values());
}

double nll_metric(const Eigen::Ref<const Eigen::VectorXd>& returns, const Eigen::Ref<const Eigen::VectorXd>& sigma_hat) {
  check_aligned(returns, sigma_hat);
  if (!(sigma_hat.array() > 0.0).all()) fail(ErrorKind::InvalidInput, "sigma_hat must be positive");
  const Eigen::ArrayXd var = sigma_hat.array().square();
  return (0.5 * (2.0 * std::numbers::pi * var).log() + returns.array().square() / (2.0 * var)).mean();
}

MzResult mz_regression(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  check_aligned(truth, forecast);
  if (truth.size() < 3) fail(ErrorKind::InsufficientData, "MZ regression needs at least three points");
  if (forecast.maxCoeff() == forecast.minCoeff()) fail(ErrorKind::SingularDesign, "forecast is constant");
  Eigen::MatrixXd X(truth.size(), 2);
  X.col(0).setOnes();
  X.col(1) = forecast;
  const auto fit = ols(X, truth);
  return MzResult{fit.coef[0], fit.coef[1], fit.r2};
}

DeltaStats delta_stats(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast) {
  check_aligned(truth, forecast);
  return DeltaStats{forecast.mean() - truth.mean(),
                    (forecast.maxCoeff() - forecast.minCoeff()) - (truth.maxCoeff() - truth.minCoeff())};
}

MetricRow evaluate_forecast(std::string model, const Eigen::Ref<const Eigen::VectorXd>& truth,
                            const Eigen::Ref<const Eigen::VectorXd>& forecast,
                            const Eigen::Ref<const Eigen::VectorXd>& returns) {
  MetricRow row;
  row.model = std::move(model);
  const auto pm = point_metrics(truth, forecast);
  row.mae = pm.mae;
  row.rmse = pm.rmse;
  row.hrmse = pm.hrmse;
  row.qlike = pm.qlike;
  if (returns.size() == forecast.size() && (forecast.array() > 0.0).all()) row.nll = nll_metric(returns, forecast);
  if (truth.size() >= 3 && forecast.maxCoeff() > forecast.minCoeff()) {
    try {
      row.r2 = mz_regression(truth, forecast).r2;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularDesign) throw;
    }
  }
  const auto d = delta_stats(truth, forecast);
  row.delta_mean = d.mean;
  row.delta_amplitude = d.amplitude;
  return row;
}

}  // namespace sigmaforge
