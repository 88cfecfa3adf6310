#include "sigmaforge/baselines.hpp"
#include "sigmaforge/error.hpp"
#include "sigmaforge/rng.hpp"
#include "sigmaforge/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace sigmaforge;

namespace {

Eigen::VectorXd simulate_logsv(const SvParams& p, Eigen::Index n, std::uint64_t seed, Eigen::VectorXd* h_out = nullptr) {
  Rng rng(seed);
  Eigen::VectorXd r(n), h(n);
  double state = p.mu + p.sigma / std::sqrt(1.0 - p.phi * p.phi) * rng.normal();
  for (Eigen::Index t = 0; t < n; ++t) {
    if (t > 0) state = p.mu + p.phi * (state - p.mu) + p.sigma * rng.normal();
    h[t] = state;
    r[t] = std::exp(0.5 * state) * rng.normal();
  }
  if (h_out) *h_out = h;
  return r;
}

double sample_std(const Eigen::VectorXd& x) {
  return std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1.0));
}

}  // namespace

TEST_CASE("garch filter hand recursion") {
  const GarchParams p{GarchVariant::Garch, 0.1, 0.2, 0.7, 0.0};
  Eigen::VectorXd x(2);
  x << 1.0, 0.0;
  CHECK(garch_filter(p, x, 1.0)[1] == doctest::Approx(1.0).epsilon(1e-15));
  x[0] = 2.0;
  CHECK(garch_filter(p, x, 1.0)[1] == doctest::Approx(1.6).epsilon(1e-15));
  x[0] = -2.0;
  CHECK(garch_filter(p, x, 1.0)[1] == doctest::Approx(1.6).epsilon(1e-15));
}

TEST_CASE("garch filter degenerate cases") {
  const auto x = sim_garch11(0.1, 0.1, 0.8, 500, 3).returns.values();

  const auto flat = garch_filter({GarchVariant::Garch, 0.37, 0.0, 0.0, 0.0}, x, 2.0);
  for (Eigen::Index t = 1; t < flat.size(); ++t) CHECK(flat[t] == 0.37);

  const GarchParams g{GarchVariant::Garch, 0.1, 0.1, 0.8, 0.0};
  GarchParams gjr = g;
  gjr.variant = GarchVariant::Gjr;
  CHECK(garch_filter(gjr, x) == garch_filter(g, x));

  Eigen::VectorXd y(2);
  y << -2.0, 0.0;
  gjr.gamma = 0.1;
  CHECK(garch_filter(gjr, y, 1.0)[1] == doctest::Approx(0.1 + 0.4 + 0.4 + 0.8).epsilon(1e-15));
  GarchParams tarch{GarchVariant::Tarch, 0.1, 0.1, 0.8, 0.1};
  CHECK(garch_filter(tarch, y, 1.0)[1] == doctest::Approx(0.1 + 0.4 + 0.2 + 0.8).epsilon(1e-15));
  y[0] = 2.0;
  CHECK(garch_filter(tarch, y, 1.0)[1] == doctest::Approx(0.1 + 0.4 + 0.8).epsilon(1e-15));
}

TEST_CASE("egarch hand step") {
  const GarchParams p{GarchVariant::Egarch, -0.1, 0.2, 0.9, -0.05};
  Eigen::VectorXd x(2);
  x << -2.0, 0.0;
  const double v0 = 4.0;
  const double z = -1.0;
  const double expected = std::exp(-0.1 + 0.2 * (1.0 - std::sqrt(2.0 / M_PI)) - 0.05 * z + 0.9 * std::log(v0));
  CHECK(garch_filter(p, x, v0)[1] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("garch filter stays positive and finite") {
  Rng rng(17);
  Eigen::VectorXd x(2000);
  for (Eigen::Index t = 0; t < x.size(); ++t) x[t] = 10.0 * rng.normal();
  x[100] = 1e3;
  x[101] = -1e3;
  for (auto v : {GarchVariant::Garch, GarchVariant::Gjr, GarchVariant::Tarch}) {
    const auto s = garch_filter({v, 1e-6, 0.3, 0.6, 0.05}, x);
    CHECK((s.array() > 0.0).all());
  }
  const auto e = garch_filter({GarchVariant::Egarch, 0.0, 0.5, 0.99, -0.3}, x);
  CHECK(e.allFinite());
  CHECK((e.array() > 0.0).all());
}

TEST_CASE("parameter validity") {
  CHECK(GarchParams{GarchVariant::Garch, 0.1, 0.1, 0.8, 0.0}.valid());
  CHECK_FALSE(GarchParams{GarchVariant::Garch, 0.1, 0.3, 0.7, 0.0}.valid());
  CHECK_FALSE(GarchParams{GarchVariant::Garch, 0.0, 0.1, 0.8, 0.0}.valid());
  CHECK(GarchParams{GarchVariant::Gjr, 0.1, 0.1, 0.8, 0.18}.valid());
  CHECK_FALSE(GarchParams{GarchVariant::Gjr, 0.1, 0.1, 0.8, 0.2}.valid());
  CHECK(GarchParams{GarchVariant::Egarch, -5.0, -1.0, 0.99, 3.0}.valid());
  CHECK_FALSE(GarchParams{GarchVariant::Egarch, 0.0, 0.0, 1.0, 0.0}.valid());
  CHECK(parse_garch_variant("gjr-garch") == GarchVariant::Gjr);
  CHECK(parse_garch_variant("garch11") == GarchVariant::Garch);
  CHECK_THROWS_AS(parse_garch_variant("figarch"), Error);
}

TEST_CASE("garch mle") {
  const auto path = sim_garch11(0.1, 0.1, 0.8, 10000, 1);
  const auto& x = path.returns.values();
  const auto fit = fit_garch(x, GarchVariant::Garch);
  CHECK(std::abs(fit.params.omega - 0.1) < 0.05);
  CHECK(std::abs(fit.params.alpha - 0.1) < 0.05);
  CHECK(std::abs(fit.params.beta - 0.8) < 0.05);
  CHECK(fit.params.valid());

  const GarchParams truth{GarchVariant::Garch, 0.1, 0.1, 0.8, 0.0};
  const double ll_truth = gaussian_loglik(x, garch_filter(truth, x, fit.init_variance));
  CHECK(fit.loglik >= ll_truth - 1e-6 * static_cast<double>(x.size()));

  SUBCASE("scale covariance") {
    const Eigen::VectorXd scaled = 10.0 * x;
    const auto s = fit_garch(scaled, GarchVariant::Garch);
    CHECK(std::abs(s.params.alpha - fit.params.alpha) < 1e-3);
    CHECK(std::abs(s.params.beta - fit.params.beta) < 1e-3);
    CHECK(std::abs(s.params.omega / (100.0 * fit.params.omega) - 1.0) < 1e-2);
  }
}

TEST_CASE("every variant fits a valid model") {
  const auto x = sim_garch11(0.05, 0.1, 0.85, 1500, 9).returns.values();
  for (auto v : {GarchVariant::Garch, GarchVariant::Egarch, GarchVariant::Tarch, GarchVariant::Gjr}) {
    CAPTURE(to_string(v));
    const auto fit = fit_garch(x, v);
    CHECK(fit.params.variant == v);
    CHECK(fit.params.valid());
    CHECK(std::isfinite(fit.loglik));
  }
}

TEST_CASE("fit_garch input errors") {
  CHECK_THROWS_AS(fit_garch(Eigen::VectorXd::Ones(50), GarchVariant::Garch), Error);
  try {
    fit_garch(Eigen::VectorXd::Constant(200, 0.2), GarchVariant::Garch);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("har exactness") {
  const HarParams truth{0.1, 0.4, 0.3, 0.2};
  Rng rng(5);
  Eigen::VectorXd rv(300);
  for (Eigen::Index t = 0; t < kHarMonth; ++t) rv[t] = rng.uniform(0.5, 1.5);
  for (Eigen::Index t = kHarMonth; t < rv.size(); ++t)
    rv[t] = truth.c + truth.beta_d * rv[t - 1] + truth.beta_w * rv.segment(t - kHarWeek, kHarWeek).mean() +
            truth.beta_m * rv.segment(t - kHarMonth, kHarMonth).mean();

  const auto fit = fit_har(VolSeries(rv));
  CHECK(std::abs(fit.c - truth.c) < 1e-8);
  CHECK(std::abs(fit.beta_d - truth.beta_d) < 1e-8);
  CHECK(std::abs(fit.beta_w - truth.beta_w) < 1e-8);
  CHECK(std::abs(fit.beta_m - truth.beta_m) < 1e-8);

  const auto fc = har_forecast(fit, VolSeries(rv));
  CHECK(fc.size() == rv.size() - 1);
  CHECK(fc.index().front() == VolSeries(rv).index()[1]);
  for (Eigen::Index t = kHarMonth; t < rv.size(); ++t) CHECK(std::abs(fc[t - 1] - rv[t]) < 1e-8);
}

TEST_CASE("har identity map and degenerate design") {
  Rng rng(6);
  Eigen::VectorXd rv(40);
  for (auto& v : rv) v = rng.uniform(0.1, 2.0);
  const auto fc = har_forecast_values({0.0, 1.0, 0.0, 0.0}, rv);
  for (Eigen::Index t = 1; t < rv.size(); ++t) CHECK(fc[t - 1] == rv[t - 1]);

  try {
    fit_har(VolSeries(Eigen::VectorXd::Constant(100, 0.3)));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularDesign);
  }
  CHECK_THROWS_AS(fit_har(VolSeries(Eigen::VectorXd::Ones(22))), Error);
}

TEST_CASE("har residuals are orthogonal to the regressors") {
  Rng rng(8);
  Eigen::VectorXd rv(1000);
  for (auto& v : rv) v = std::exp(0.3 * rng.normal());
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  har_design(rv, X, y);
  const auto p = fit_har(VolSeries(rv));
  Eigen::Vector4d b(p.c, p.beta_d, p.beta_w, p.beta_m);
  const Eigen::VectorXd resid = y - X * b;
  const Eigen::VectorXd dots = X.transpose() * resid;
  CHECK(dots.cwiseAbs().maxCoeff() <= 1e-8 * static_cast<double>(y.size()));
}

TEST_CASE("kalman two-step hand oracle") {
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  const auto steps = kalman_ar1(y, {0.0, 0.5, 1.0}, 0.0, 1.0);
  REQUIRE(steps.size() == 2);
  CHECK(std::abs(steps[0].pred_mean - 0.0) < 1e-10);
  CHECK(std::abs(steps[0].pred_var - 4.0 / 3.0) < 1e-10);
  CHECK(std::abs(steps[0].innovation - 1.0) < 1e-10);
  CHECK(std::abs(steps[0].innovation_var - 7.0 / 3.0) < 1e-10);
  CHECK(std::abs(steps[0].filt_mean - 4.0 / 7.0) < 1e-10);
  CHECK(std::abs(steps[0].filt_var - 4.0 / 7.0) < 1e-10);
  CHECK(std::abs(steps[1].pred_mean - 2.0 / 7.0) < 1e-10);
  CHECK(std::abs(steps[1].pred_var - 8.0 / 7.0) < 1e-10);
  CHECK(std::abs(steps[1].innovation - 12.0 / 7.0) < 1e-10);
  CHECK(std::abs(steps[1].innovation_var - 15.0 / 7.0) < 1e-10);
  CHECK(std::abs(steps[1].filt_mean - 6.0 / 5.0) < 1e-10);
  CHECK(std::abs(steps[1].filt_var - 8.0 / 15.0) < 1e-10);
}

TEST_CASE("log-sv recovers persistence") {
  const SvParams truth{-1.0, 0.95, 0.2};
  const auto r = simulate_logsv(truth, 5000, 21);
  const auto fit = fit_logsv(r);
  CHECK(std::abs(fit.params.phi - truth.phi) < 0.05);
  CHECK(std::abs(fit.params.phi) < 1.0);
  CHECK(fit.params.sigma > 0.0);
  CHECK(fit.sigma.size() == r.size());
  CHECK((fit.sigma.array() > 0.0).all());
}

TEST_CASE("log-sv with a constant state gives a flat filtered path") {
  const SvParams truth{-1.0, 0.95, 1e-6};
  const auto r = simulate_logsv(truth, 5000, 22);
  const auto fit = fit_logsv(r);
  const Eigen::VectorXd h = 2.0 * fit.sigma.array().log();
  CHECK(sample_std(h) < 0.05);
  CHECK(std::abs(h.mean() - truth.mu) < 0.1);
}

TEST_CASE("log-sv filter handles zero returns") {
  Eigen::VectorXd r = simulate_logsv({-1.0, 0.9, 0.3}, 300, 23);
  r.segment(10, 5).setZero();
  const auto s = logsv_filter({-1.0, 0.9, 0.3}, r);
  CHECK(s.allFinite());
  CHECK(std::isfinite(logsv_loglik(r, {-1.0, 0.9, 0.3})));
  CHECK_THROWS_AS(fit_logsv(Eigen::VectorXd::Zero(200)), Error);
}
