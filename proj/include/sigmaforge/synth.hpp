#pragma once

#include "sigmaforge/timeseries.hpp"

#include <cstdint>

namespace sigmaforge {

struct SineVolConfig {
  std::size_t n = 2000;
  double amplitude = 0.7;    // A, 0 <= A < 1
  double half_period = 50;   // B, in steps
  std::uint64_t seed = 0;
};

struct HestonParams {
  double mu = 0.0;
  double kappa = 0.0;
  double theta = 0.0;
  double vol_of_vol = 0.0;
  double v0 = 0.0;
  double s0 = 1.0;
  double rho = 0.0;
};

struct SyntheticPath {
  VolSeries sigma;
  ReturnSeries returns;
};

struct HestonPath {
  Eigen::VectorXd prices;  // n_days * steps_per_day + 1 points
  VolSeries daily_vol;     // sqrt(mean intraday truncated variance)
  Eigen::VectorXd variance;  // truncated variance at each step, same length as prices
};

/// sigma_i = 1 + A sin(pi i / B), r_i = sigma_i * eps_i, i = 0..n-1.
SyntheticPath gen_sine_vol(const SineVolConfig& cfg);

/// GARCH(1,1) path started at the unconditional variance with a 500-step
/// burn-in discarded.
SyntheticPath sim_garch11(double omega, double alpha, double beta, std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kGarchBurnIn = 500;

/// Full-truncation Euler scheme, dt = 1 / steps_per_day. Prices follow the
/// log-Euler step so they stay positive.
HestonPath sim_heston(const HestonParams& params, std::size_t n_days, std::size_t steps_per_day,
                      std::uint64_t seed);

}  // namespace sigmaforge
