#pragma once

#include "sigmaforge/activations.hpp"
#include "sigmaforge/rng.hpp"

#include <Eigen/Core>

#include <cstddef>

namespace sigmaforge::nn {

/// adjusted_softplus with the beta > 0 precondition enforced.
double checked_adjusted_softplus(double x, double beta);

/// fan_in x fan_out matrix with entries iid Uniform(-a, a),
/// a = sqrt(6 / (fan_in + fan_out)). Drawn in column-major order.
Eigen::MatrixXd xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Rescales `grads` in place so that its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_by_global_norm(Eigen::Ref<Eigen::VectorXd> grads, double max_norm);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(Eigen::Index n, AdamHyper h) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)), hyper(h) {}
};

/// One bias-corrected Adam step. Entries with mask == 0 keep their parameter
/// and moment values (used for block-alternating updates); an empty mask
/// updates everything. Increments state.step.
void adam_update(AdamState& state, Eigen::Ref<Eigen::VectorXd> params,
                 const Eigen::Ref<const Eigen::VectorXd>& grads,
                 const Eigen::Ref<const Eigen::VectorXd>& mask = Eigen::VectorXd());

}  // namespace sigmaforge::nn
