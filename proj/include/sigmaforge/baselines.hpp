#pragma once

#include "sigmaforge/timeseries.hpp"

#include <Eigen/Core>

#include <optional>
#include <string_view>
#include <vector>

namespace sigmaforge {

enum class GarchVariant { Garch, Egarch, Tarch, Gjr };

std::string_view to_string(GarchVariant v) noexcept;
/// Accepts garch / garch11 / egarch / tarch / gjr / gjr-garch.
GarchVariant parse_garch_variant(std::string_view name);

/// Order (1,1) coefficients. For EGARCH `omega` is the log-variance
/// intercept and `gamma` multiplies the signed standardized shock.
struct GarchParams {
  GarchVariant variant = GarchVariant::Garch;
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  /// Positivity and stationarity constraints for the variant.
  bool valid() const noexcept;
};

/// One-step-ahead conditional variances. Entry t is the variance of
/// returns[t] given returns[0..t-1]; entry 0 is `init_variance`, or the
/// sample variance of `returns` when none is given.
Eigen::VectorXd garch_filter(const GarchParams& params, const Eigen::Ref<const Eigen::VectorXd>& returns,
                             std::optional<double> init_variance = std::nullopt);

/// Gaussian log-likelihood of `returns` under the given variance path.
double gaussian_loglik(const Eigen::Ref<const Eigen::VectorXd>& returns, const Eigen::Ref<const Eigen::VectorXd>& variance);

struct GarchFit {
  GarchParams params;
  double loglik = 0.0;
  double init_variance = 0.0;  // sample variance of the fitting sample
  int starts_converged = 0;
};

/// Maximum likelihood by Nelder-Mead over an unconstrained
/// reparameterisation, from 5 fixed starting points.
GarchFit fit_garch(const Eigen::Ref<const Eigen::VectorXd>& returns, GarchVariant variant);

struct HarParams {
  double c = 0.0;
  double beta_d = 0.0;
  double beta_w = 0.0;
  double beta_m = 0.0;
};

inline constexpr int kHarWeek = 5;
inline constexpr int kHarMonth = 22;

/// Rows t = 22..T-1 of the HAR design: (1, RV[t-1], mean RV[t-5..t-1],
/// mean RV[t-22..t-1]), and the matching targets RV[t].
void har_design(const Eigen::Ref<const Eigen::VectorXd>& rv, Eigen::MatrixXd& X, Eigen::VectorXd& y);

HarParams fit_har(const VolSeries& rv);

/// Forecast of RV[t] from RV[0..t-1] for t = 1..T-1, labelled like rv[1..].
/// Weekly and monthly means use whatever history exists when t < 22.
/// Negative fitted values are clamped to 0.
VolSeries har_forecast(const HarParams& params, const VolSeries& rv);
Eigen::VectorXd har_forecast_values(const HarParams& params, const Eigen::Ref<const Eigen::VectorXd>& rv);

struct SvParams {
  double mu = 0.0;     // log-variance level
  double phi = 0.0;    // persistence, |phi| < 1
  double sigma = 0.1;  // innovation std of the log variance
};

/// Mean and variance of ln(eps^2) for eps ~ N(0, 1).
inline constexpr double kLogChi2Mean = -1.2703628454614782;
inline constexpr double kLogChi2Var = 4.934802200544679;  // pi^2 / 2

/// Smallest squared return used before taking logs.
inline constexpr double kSvSquareFloor = 1e-10;

/// One scalar Kalman step for h_t = mu + phi (h_{t-1} - mu) + sigma eta_t,
/// y_t = h_t + obs_mean + xi_t, Var(xi) = obs_var.
struct KalmanStep {
  double pred_mean = 0.0;
  double pred_var = 0.0;
  double innovation = 0.0;
  double innovation_var = 0.0;
  double filt_mean = 0.0;
  double filt_var = 0.0;
};

/// Runs the filter from the stationary prior (mean mu, variance
/// sigma^2 / (1 - phi^2)).
std::vector<KalmanStep> kalman_ar1(const Eigen::Ref<const Eigen::VectorXd>& y, const SvParams& params,
                                   double obs_mean, double obs_var);

/// Quasi log-likelihood of the linearised log-SV model for returns.
double logsv_loglik(const Eigen::Ref<const Eigen::VectorXd>& returns, const SvParams& params);

/// sigma_hat[t] = exp(h_{t|t-1} / 2).
Eigen::VectorXd logsv_filter(const SvParams& params, const Eigen::Ref<const Eigen::VectorXd>& returns);

struct SvFit {
  SvParams params;
  double loglik = 0.0;
  Eigen::VectorXd sigma;  // filtered sigma_hat on the fitting sample
};

SvFit fit_logsv(const Eigen::Ref<const Eigen::VectorXd>& returns);

}  // namespace sigmaforge
