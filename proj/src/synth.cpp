#include "sigmaforge/synth.hpp"

#include "sigmaforge/error.hpp"
#include "sigmaforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sigmaforge {

SyntheticPath gen_sine_vol(const SineVolConfig& cfg) {
  if (cfg.n < 2) fail(ErrorKind::InvalidInput, "sine generator needs n >= 2");
  if (!(cfg.amplitude >= 0.0 && cfg.amplitude < 1.0)) fail(ErrorKind::InvalidInput, "amplitude must lie in [0, 1)");
  if (!(cfg.half_period > 0.0)) fail(ErrorKind::InvalidInput, "half period must be positive");

  Rng rng(cfg.seed);
  const auto n = static_cast<Eigen::Index>(cfg.n);
  Eigen::VectorXd sigma(n), r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma[i] = 1.0 + cfg.amplitude * std::sin(std::numbers::pi * static_cast<double>(i) / cfg.half_period);
    r[i] = sigma[i] * rng.normal();
  }
  return {VolSeries(std::move(sigma)), ReturnSeries(std::move(r))};
}

SyntheticPath sim_garch11(double omega, double alpha, double beta, std::size_t n, std::uint64_t seed) {
  if (!(omega > 0.0) || alpha < 0.0 || beta < 0.0 || !(alpha + beta < 1.0))
    fail(ErrorKind::InvalidInput, "GARCH(1,1) simulation needs omega > 0, alpha, beta >= 0, alpha + beta < 1");
  if (n < 1) fail(ErrorKind::InvalidInput, "n must be positive");

  Rng rng(seed);
  double var = omega / (1.0 - alpha - beta);
  double x = 0.0;
  Eigen::VectorXd sigma(static_cast<Eigen::Index>(n)), r(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < kGarchBurnIn + n; ++t) {
    if (t > 0) var = omega + alpha * x * x + beta * var;
    x = std::sqrt(var) * rng.normal();
    if (t >= kGarchBurnIn) {
      const auto i = static_cast<Eigen::Index>(t - kGarchBurnIn);
      sigma[i] = std::sqrt(var);
      r[i] = x;
    }
  }
  return {VolSeries(std::move(sigma)), ReturnSeries(std::move(r))};
}

HestonPath sim_heston(const HestonParams& p, std::size_t n_days, std::size_t steps_per_day, std::uint64_t seed) {
  if (p.kappa < 0 || p.theta < 0 || p.vol_of_vol < 0 || p.v0 < 0 || !(p.s0 > 0) || std::abs(p.rho) > 1.0)
    fail(ErrorKind::InvalidInput, "invalid Heston parameters");
  if (steps_per_day < 1 || n_days < 1) fail(ErrorKind::InvalidInput, "need n_days >= 1 and steps_per_day >= 1");

  Rng rng(seed);
  const double dt = 1.0 / static_cast<double>(steps_per_day);
  const double sqrt_dt = std::sqrt(dt);
  const double rho_perp = std::sqrt(1.0 - p.rho * p.rho);
  const auto steps = static_cast<Eigen::Index>(n_days * steps_per_day);

  HestonPath out;
  out.prices.resize(steps + 1);
  out.variance.resize(steps + 1);
  Eigen::VectorXd daily(static_cast<Eigen::Index>(n_days));

  double s = p.s0;
  double v = p.v0;
  out.prices[0] = s;
  out.variance[0] = std::max(v, 0.0);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double z1 = rng.normal();
    const double z2 = p.rho * z1 + rho_perp * rng.normal();
    const double vp = std::max(v, 0.0);
    s *= std::exp((p.mu - 0.5 * vp) * dt + std::sqrt(vp) * sqrt_dt * z1);
    v += p.kappa * (p.theta - vp) * dt + p.vol_of_vol * std::sqrt(vp) * sqrt_dt * z2;
    out.prices[k + 1] = s;
    out.variance[k + 1] = std::max(v, 0.0);
    acc += out.variance[k + 1];
    if ((k + 1) % static_cast<Eigen::Index>(steps_per_day) == 0) {
      daily[(k + 1) / static_cast<Eigen::Index>(steps_per_day) - 1] = std::sqrt(acc / static_cast<double>(steps_per_day));
      acc = 0.0;
    }
  }
  out.daily_vol = VolSeries(std::move(daily));
  return out;
}

}  // namespace sigmaforge
