#include "sigmaforge/nn.hpp"

#include "sigmaforge/error.hpp"

#include <cmath>

namespace sigmaforge::nn {

double checked_adjusted_softplus(double x, double beta) {
  if (!(beta > 0.0)) fail(ErrorKind::InvalidInput, "adjusted softplus needs beta > 0");
  return adjusted_softplus(x, beta);
}

Eigen::MatrixXd xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) fail(ErrorKind::InvalidInput, "xavier_uniform needs positive fans");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Eigen::MatrixXd w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.uniform(-a, a);
  return w;
}

double clip_by_global_norm(Eigen::Ref<Eigen::VectorXd> grads, double max_norm) {
  if (!(max_norm > 0.0)) fail(ErrorKind::InvalidInput, "max_norm must be positive");
  const double norm = grads.norm();
  if (norm > max_norm) grads *= max_norm / norm;
  return norm;
}

void adam_update(AdamState& s, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                 const Eigen::Ref<const Eigen::VectorXd>& mask) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    fail(ErrorKind::Shape, "adam: parameter, gradient and moment lengths differ");
  if (mask.size() != 0 && mask.size() != params.size()) fail(ErrorKind::Shape, "adam: mask length differs");

  ++s.step;
  const auto& h = s.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (mask.size() != 0 && mask[i] == 0.0) continue;
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * grads[i];
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace sigmaforge::nn
