#pragma once

#include "sigmaforge/timeseries.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>

namespace sigmaforge {

struct PointMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  // Undefined when the truth series contains a zero.
  std::optional<double> hrmse;
  std::optional<double> qlike;
};

PointMetrics point_metrics(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);
PointMetrics point_metrics(const VolSeries& truth, const VolSeries& forecast);

double mae(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);
double rmse(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);
/// sqrt(mean((1 - forecast/truth)^2)); requires truth > 0.
double hrmse(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);
/// mean(ln truth + forecast/truth). Note the roles of forecast and truth are
/// the reverse of the usual Patton QLIKE; this follows the published table
/// definition. Requires truth > 0.
double qlike(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);

/// Mean Gaussian negative log density: 0.5 ln(2 pi s^2) + r^2 / (2 s^2).
double nll_metric(const Eigen::Ref<const Eigen::VectorXd>& returns, const Eigen::Ref<const Eigen::VectorXd>& sigma_hat);

struct MzResult {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

/// OLS of truth on (1, forecast).
MzResult mz_regression(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);

struct DeltaStats {
  double mean = 0.0;       // mean(forecast) - mean(truth)
  double amplitude = 0.0;  // range(forecast) - range(truth)
};

DeltaStats delta_stats(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& forecast);

/// One model's evaluation row. Fields that could not be computed are empty.
struct MetricRow {
  std::string model;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> hrmse;
  std::optional<double> qlike;
  std::optional<double> nll;
  std::optional<double> r2;
  double delta_mean = 0.0;
  double delta_amplitude = 0.0;
};

/// Computes every metric that the inputs allow. `returns` may be empty, in
/// which case NLL is left undefined.
MetricRow evaluate_forecast(std::string model, const Eigen::Ref<const Eigen::VectorXd>& truth,
                            const Eigen::Ref<const Eigen::VectorXd>& forecast,
                            const Eigen::Ref<const Eigen::VectorXd>& returns);

}  // namespace sigmaforge
