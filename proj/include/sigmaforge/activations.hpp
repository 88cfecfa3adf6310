#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sigmaforge {

/// (1/beta) ln(1 + e^{beta x}), stable for large |beta x|.
inline double softplus(double x, double beta = 1.0) {
  const double z = beta * x;
  return (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)))) / beta;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double floor_at(double x, double lo) { return x > lo ? x : lo; }

inline double square(double x) { return x * x; }

/// Normalizer of the adjusted softplus: softplus_beta(1) - ln2 / beta.
inline double adjusted_softplus_scale(double beta) {
  return softplus(1.0, beta) - std::numbers::ln2 / beta;
}

/// Softplus shifted to vanish at 0, clamped at 0 for negative inputs and
/// scaled so that f(1) = 1. Requires beta > 0 (checked by callers that take
/// user input; see nn::checked_adjusted_softplus).
inline double adjusted_softplus(double x, double beta = 1.0) {
  if (x <= 0.0) return 0.0;
  return std::max(0.0, (softplus(x, beta) - std::numbers::ln2 / beta) / adjusted_softplus_scale(beta));
}

/// d/dx of adjusted_softplus; 0 on x <= 0 (left limit at the clamp).
inline double adjusted_softplus_grad(double x, double beta = 1.0) {
  if (x <= 0.0) return 0.0;
  return sigmoid(beta * x) / adjusted_softplus_scale(beta);
}

}  // namespace sigmaforge
