#include "sigmaforge/baselines.hpp"

#include "sigmaforge/error.hpp"
#include "sigmaforge/optim.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace sigmaforge {

std::string_view to_string(GarchVariant v) noexcept {
  switch (v) {
    case GarchVariant::Garch: return "garch";
    case GarchVariant::Egarch: return "egarch";
    case GarchVariant::Tarch: return "tarch";
    case GarchVariant::Gjr: return "gjr";
  }
  return "garch";
}

GarchVariant parse_garch_variant(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "garch" || s == "garch11") return GarchVariant::Garch;
  if (s == "egarch") return GarchVariant::Egarch;
  if (s == "tarch") return GarchVariant::Tarch;
  if (s == "gjr" || s == "gjr-garch") return GarchVariant::Gjr;
  fail(ErrorKind::InvalidInput, "unknown GARCH variant '" + std::string(name) + "'");
}

bool GarchParams::valid() const noexcept {
  if (!std::isfinite(omega) || !std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) return false;
  switch (variant) {
    case GarchVariant::Egarch: return std::abs(beta) < 1.0;
    case GarchVariant::Garch: return omega > 0 && alpha >= 0 && beta >= 0 && gamma == 0.0 && alpha + beta < 1.0;
    case GarchVariant::Gjr: return omega > 0 && alpha >= 0 && beta >= 0 && gamma >= 0 && alpha + beta + 0.5 * gamma < 1.0;
    case GarchVariant::Tarch: return omega > 0 && alpha >= 0 && beta >= 0 && gamma >= 0 && alpha + beta < 1.0;
  }
  return false;
}

namespace {

double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() < 2) fail(ErrorKind::InsufficientData, "need at least two returns");
  return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

// Log-variance is kept within this distance of its starting value.
constexpr double kLogVarBand = 50.0;
constexpr double kMaxAbsShock = 50.0;

}  // namespace

Eigen::VectorXd garch_filter(const GarchParams& p, const Eigen::Ref<const Eigen::VectorXd>& x,
                             std::optional<double> init_variance) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd var(n);
  if (n == 0) return var;
  const double v0 = init_variance ? *init_variance : sample_variance(x);
  if (!(v0 > 0.0)) fail(ErrorKind::Degenerate, "initial variance must be positive");
  var[0] = v0;

  if (p.variant == GarchVariant::Egarch) {
    const double lo = std::log(v0) - kLogVarBand, hi = std::log(v0) + kLogVarBand;
    const double centre = std::sqrt(2.0 / std::numbers::pi);
    double logv = std::log(v0);
    for (Eigen::Index t = 1; t < n; ++t) {
      const double z = std::clamp(x[t - 1] / std::sqrt(var[t - 1]), -kMaxAbsShock, kMaxAbsShock);
      logv = std::clamp(p.omega + p.alpha * (std::abs(z) - centre) + p.gamma * z + p.beta * logv, lo, hi);
      var[t] = std::exp(logv);
    }
    return var;
  }

  for (Eigen::Index t = 1; t < n; ++t) {
    const double prev = x[t - 1];
    double v = p.omega + p.alpha * prev * prev + p.beta * var[t - 1];
    if (prev < 0.0) {
      if (p.variant == GarchVariant::Gjr) v += p.gamma * prev * prev;
      if (p.variant == GarchVariant::Tarch) v += p.gamma * std::abs(prev);
    }
    var[t] = v;
  }
  return var;
}

double gaussian_loglik(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& var) {
  if (x.size() != var.size()) fail(ErrorKind::Shape, "returns and variance lengths differ");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double ll = 0.0;
  for (Eigen::Index t = 0; t < x.size(); ++t) ll -= 0.5 * (log2pi + std::log(var[t]) + x[t] * x[t] / var[t]);
  return ll;
}

namespace {

// Maps k free values plus an implicit zero through a softmax; the first k
// shares are returned, all positive and summing to less than one.
template <std::size_t K>
std::array<double, K> simplex_shares(const double* u) {
  double top = 0.0;
  for (std::size_t i = 0; i < K; ++i) top = std::max(top, u[i]);
  std::array<double, K> e{};
  double denom = std::exp(-top);
  for (std::size_t i = 0; i < K; ++i) {
    e[i] = std::exp(u[i] - top);
    denom += e[i];
  }
  for (auto& v : e) v /= denom;
  return e;
}

template <std::size_t K>
void simplex_logits(const std::array<double, K>& shares, double* u) {
  double slack = 1.0;
  for (double s : shares) slack -= s;
  for (std::size_t i = 0; i < K; ++i) u[i] = std::log(shares[i] / slack);
}

GarchParams unpack(GarchVariant variant, const Eigen::VectorXd& th) {
  GarchParams p;
  p.variant = variant;
  switch (variant) {
    case GarchVariant::Garch: {
      const auto s = simplex_shares<2>(th.data() + 1);
      p.omega = std::exp(th[0]);
      p.alpha = s[0];
      p.beta = s[1];
      break;
    }
    case GarchVariant::Gjr: {
      const auto s = simplex_shares<3>(th.data() + 1);
      p.omega = std::exp(th[0]);
      p.alpha = s[0];
      p.beta = s[1];
      p.gamma = 2.0 * s[2];
      break;
    }
    case GarchVariant::Tarch: {
      const auto s = simplex_shares<2>(th.data() + 1);
      p.omega = std::exp(th[0]);
      p.alpha = s[0];
      p.beta = s[1];
      p.gamma = std::exp(th[3]);
      break;
    }
    case GarchVariant::Egarch:
      p.omega = th[0];
      p.alpha = th[1];
      p.gamma = th[2];
      p.beta = std::tanh(th[3]);
      break;
  }
  return p;
}

Eigen::VectorXd pack(const GarchParams& p) {
  Eigen::VectorXd th;
  switch (p.variant) {
    case GarchVariant::Garch:
      th.resize(3);
      th[0] = std::log(p.omega);
      simplex_logits<2>({p.alpha, p.beta}, th.data() + 1);
      break;
    case GarchVariant::Gjr:
      th.resize(4);
      th[0] = std::log(p.omega);
      simplex_logits<3>({p.alpha, p.beta, 0.5 * p.gamma}, th.data() + 1);
      break;
    case GarchVariant::Tarch:
      th.resize(4);
      th[0] = std::log(p.omega);
      simplex_logits<2>({p.alpha, p.beta}, th.data() + 1);
      th[3] = std::log(p.gamma);
      break;
    case GarchVariant::Egarch:
      th.resize(4);
      th << p.omega, p.alpha, p.gamma, std::atanh(p.beta);
      break;
  }
  return th;
}

std::array<GarchParams, 5> starting_points(GarchVariant variant, double var) {
  constexpr std::array<std::pair<double, double>, 5> ab{{{0.05, 0.90}, {0.10, 0.80}, {0.15, 0.70}, {0.05, 0.60}, {0.25, 0.60}}};
  std::array<GarchParams, 5> out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& p = out[i];
    p.variant = variant;
    const auto [a, b] = ab[i];
    switch (variant) {
      case GarchVariant::Garch:
        p = {variant, var * (1.0 - a - b), a, b, 0.0};
        break;
      case GarchVariant::Gjr:
        p = {variant, var * (1.0 - a - b - 0.025), a, b, 0.05};
        break;
      case GarchVariant::Tarch:
        p = {variant, var * (1.0 - a - b), a, b, 0.05 * std::sqrt(var)};
        break;
      case GarchVariant::Egarch: {
        constexpr std::array<double, 5> betas{0.95, 0.90, 0.80, 0.98, 0.70};
        p = {variant, (1.0 - betas[i]) * std::log(var), a, betas[i], i % 2 ? 0.0 : -0.05};
        break;
      }
    }
  }
  return out;
}

}  // namespace

GarchFit fit_garch(const Eigen::Ref<const Eigen::VectorXd>& returns, GarchVariant variant) {
  if (returns.size() < 100) fail(ErrorKind::InsufficientData, "GARCH fitting needs at least 100 returns");
  if (!returns.allFinite()) fail(ErrorKind::NonFinite, "returns contain NaN or Inf");
  const Eigen::VectorXd x = returns;
  const double v0 = sample_variance(x);
  const double scale = x.cwiseAbs().maxCoeff();
  if (!(v0 > 1e-28 * scale * scale)) fail(ErrorKind::Degenerate, "returns have zero variance");

  auto objective = [&](const Eigen::VectorXd& th) {
    const GarchParams p = unpack(variant, th);
    if (!p.valid()) return std::numeric_limits<double>::infinity();
    return -gaussian_loglik(x, garch_filter(p, x, v0));
  };

  NelderMeadOptions opts;
  opts.initial_step = 0.5;
  GarchFit best;
  best.loglik = -std::numeric_limits<double>::infinity();
  best.init_variance = v0;
  for (const auto& start : starting_points(variant, v0)) {
    const auto r = nelder_mead(objective, pack(start), opts);
    if (r.converged) ++best.starts_converged;
    if (std::isfinite(r.value) && -r.value > best.loglik) {
      best.loglik = -r.value;
      best.params = unpack(variant, r.x);
    }
  }
  if (!std::isfinite(best.loglik)) fail(ErrorKind::OptimizationFailed, "no start produced a finite likelihood");
  return best;
}

void har_design(const Eigen::Ref<const Eigen::VectorXd>& rv, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  const Eigen::Index n = rv.size();
  if (n <= kHarMonth) fail(ErrorKind::InsufficientData, "HAR needs at least 23 observations");
  const Eigen::Index rows = n - kHarMonth;
  X.resize(rows, 4);
  y.resize(rows);
  for (Eigen::Index t = kHarMonth; t < n; ++t) {
    const Eigen::Index r = t - kHarMonth;
    X(r, 0) = 1.0;
    X(r, 1) = rv[t - 1];
    X(r, 2) = rv.segment(t - kHarWeek, kHarWeek).mean();
    X(r, 3) = rv.segment(t - kHarMonth, kHarMonth).mean();
    y[r] = rv[t];
  }
}

HarParams fit_har(const VolSeries& rv) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  har_design(rv.values(), X, y);
  const auto fit = ols(X, y);
  return HarParams{fit.coef[0], fit.coef[1], fit.coef[2], fit.coef[3]};
}

Eigen::VectorXd har_forecast_values(const HarParams& p, const Eigen::Ref<const Eigen::VectorXd>& rv) {
  const Eigen::Index n = rv.size();
  if (n < 2) fail(ErrorKind::InsufficientData, "HAR forecasting needs at least two observations");
  Eigen::VectorXd out(n - 1);
  for (Eigen::Index t = 1; t < n; ++t) {
    const Eigen::Index wk = std::min<Eigen::Index>(t, kHarWeek);
    const Eigen::Index mo = std::min<Eigen::Index>(t, kHarMonth);
    const double f = p.c + p.beta_d * rv[t - 1] + p.beta_w * rv.segment(t - wk, wk).mean() +
                     p.beta_m * rv.segment(t - mo, mo).mean();
    out[t - 1] = std::max(f, 0.0);
  }
  return out;
}

VolSeries har_forecast(const HarParams& p, const VolSeries& rv) {
  return VolSeries(DayIndex(rv.index().begin() + 1, rv.index().end()), har_forecast_values(p, rv.values()));
}

std::vector<KalmanStep> kalman_ar1(const Eigen::Ref<const Eigen::VectorXd>& y, const SvParams& p, double obs_mean,
                                   double obs_var) {
  if (!(std::abs(p.phi) < 1.0) || !(p.sigma > 0.0) || !(obs_var > 0.0))
    fail(ErrorKind::InvalidInput, "kalman_ar1 needs |phi| < 1, sigma > 0, obs_var > 0");
  std::vector<KalmanStep> out(static_cast<std::size_t>(y.size()));
  double m = p.mu;
  double P = p.sigma * p.sigma / (1.0 - p.phi * p.phi);
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    auto& s = out[static_cast<std::size_t>(t)];
    s.pred_mean = m;
    s.pred_var = P;
    s.innovation = y[t] - m - obs_mean;
    s.innovation_var = P + obs_var;
    const double gain = P / s.innovation_var;
    s.filt_mean = m + gain * s.innovation;
    s.filt_var = P * (1.0 - gain);
    m = p.mu + p.phi * (s.filt_mean - p.mu);
    P = p.phi * p.phi * s.filt_var + p.sigma * p.sigma;
  }
  return out;
}

namespace {

Eigen::VectorXd log_squares(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.array().square().max(kSvSquareFloor).log().matrix();
}

double kalman_loglik(const std::vector<KalmanStep>& steps) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double ll = 0.0;
  for (const auto& s : steps) ll -= 0.5 * (log2pi + std::log(s.innovation_var) + s.innovation * s.innovation / s.innovation_var);
  return ll;
}

SvParams unpack_sv(const Eigen::VectorXd& th) { return SvParams{th[0], std::tanh(th[1]), std::exp(th[2])}; }

}  // namespace

double logsv_loglik(const Eigen::Ref<const Eigen::VectorXd>& returns, const SvParams& params) {
  return kalman_loglik(kalman_ar1(log_squares(returns), params, kLogChi2Mean, kLogChi2Var));
}

Eigen::VectorXd logsv_filter(const SvParams& params, const Eigen::Ref<const Eigen::VectorXd>& returns) {
  const auto steps = kalman_ar1(log_squares(returns), params, kLogChi2Mean, kLogChi2Var);
  Eigen::VectorXd sigma(returns.size());
  for (std::size_t t = 0; t < steps.size(); ++t) sigma[static_cast<Eigen::Index>(t)] = std::exp(0.5 * steps[t].pred_mean);
  return sigma;
}

SvFit fit_logsv(const Eigen::Ref<const Eigen::VectorXd>& returns) {
  if (returns.size() < 100) fail(ErrorKind::InsufficientData, "log-SV fitting needs at least 100 returns");
  if (!returns.allFinite()) fail(ErrorKind::NonFinite, "returns contain NaN or Inf");
  if ((returns.array() == 0.0).all()) fail(ErrorKind::Degenerate, "returns are all zero");
  const Eigen::VectorXd y = log_squares(returns);
  const double level = y.mean() - kLogChi2Mean;

  auto objective = [&](const Eigen::VectorXd& th) {
    const SvParams p = unpack_sv(th);
    if (!(std::abs(p.phi) < 1.0) || !(p.sigma > 0.0)) return std::numeric_limits<double>::infinity();
    return -kalman_loglik(kalman_ar1(y, p, kLogChi2Mean, kLogChi2Var));
  };

  constexpr std::array<std::pair<double, double>, 5> starts{{{0.95, 0.2}, {0.90, 0.3}, {0.98, 0.1}, {0.50, 0.5}, {0.80, 0.05}}};
  NelderMeadOptions opts;
  opts.initial_step = 0.3;
  SvFit best;
  best.loglik = -std::numeric_limits<double>::infinity();
  for (const auto& [phi, sigma] : starts) {
    Eigen::VectorXd th(3);
    th << level, std::atanh(phi), std::log(sigma);
    const auto r = nelder_mead(objective, th, opts);
    if (std::isfinite(r.value) && -r.value > best.loglik) {
      best.loglik = -r.value;
      best.params = unpack_sv(r.x);
    }
  }
  if (!std::isfinite(best.loglik)) fail(ErrorKind::OptimizationFailed, "log-SV likelihood could not be evaluated");
  best.sigma = logsv_filter(best.params, returns);
  return best;
}

}  // namespace sigmaforge
