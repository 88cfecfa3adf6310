#pragma once

#include "sigmaforge/rng.hpp"
#include "sigmaforge/sigma_cell.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sigmaforge::testing {

struct GradientCheck {
  double max_rel_err = 0.0;
  int coordinates = 0;
};

/// |a - b| / max(|a|, |b|, 1e-4): relative error, absolute below 1e-4.
inline double gradient_rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

/// Distance of the nearest ReLU / adjusted-softplus / floor kink from the
/// current tape values. Finite differences across a kink are meaningless.
inline double kink_margin(const ad::Tape& tape, double floor) {
  double margin = INFINITY;
  const auto nodes = tape.nodes();
  const auto values = tape.values();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    if (nd.op == ad::Op::Relu || nd.op == ad::Op::AdjSoftplus) {
      margin = std::min(margin, std::abs(values[static_cast<std::size_t>(nd.a)]));
    } else if (nd.op == ad::Op::FloorAt) {
      const double v = values[static_cast<std::size_t>(nd.a)];
      if (v != 0.0) margin = std::min(margin, std::abs(v - floor));
    }
  }
  return margin;
}

/// Noise-aware loss through the plain double recursion (independent of the
/// tape) for finite differences.
inline double reference_loss(const SigmaCellConfig& cfg, const Eigen::VectorXd& params,
                             std::span<const double> returns, std::span<const double> noise, double init_var) {
  auto seq = run_sequence<double>(cfg, params, returns, noise, init_var);
  return nll_sum<double>(seq.variance, returns, seq.mean, cfg.variance_floor);
}

/// Reverse-mode gradient of the sigma-cell loss against central differences
/// (h = 1e-5) at `draws` random parameter points away from kinks.
inline GradientCheck check_cell_gradients(CellVariant variant, int hidden, std::size_t length, int draws,
                                          std::uint64_t seed) {
  SigmaCellConfig cfg;
  cfg.variant = variant;
  cfg.hidden = hidden;
  cfg.residual_hidden = hidden;
  Rng rng = Rng::substream(seed, 7);
  std::vector<double> returns(length);
  for (std::size_t t = 0; t < length; ++t) returns[t] = (1.0 + 0.5 * std::sin(0.3 * t)) * rng.normal();
  const double init_var = 1.0;

  GradientCheck out;
  int accepted = 0;
  for (int attempt = 0; accepted < draws; ++attempt) {
    if (attempt > 100 * draws) fail(ErrorKind::InvalidInput, "no kink-free parameter draw found");
    Eigen::VectorXd params = init_params(cfg, seed, static_cast<std::uint64_t>(attempt));
    for (auto& p : params) p += 0.3 * rng.normal();
    // keep the output path mostly above the floor
    for (const auto& b : param_layout(cfg))
      if (b.name == "b_o") params[b.offset] = std::abs(params[b.offset]) + 0.5;
    std::vector<double> noise = draw_noise(cfg, length, rng);

    auto prog = build_loss_program(cfg, params, returns, init_var);
    if (prog.num_noise > 0) prog.tape.set_inputs(noise);
    auto [loss, grad] = ad::evaluate_with_gradients(prog.tape, as_span(params));
    if (kink_margin(prog.tape, cfg.variance_floor) < 1e-3) continue;
    ++accepted;

    const std::span<const double> eps(noise.data(), noise.size());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double h = 1e-5;
      Eigen::VectorXd up = params, down = params;
      up[i] += h;
      down[i] -= h;
      const double fd = (reference_loss(cfg, up, returns, eps, init_var) -
                         reference_loss(cfg, down, returns, eps, init_var)) / (2.0 * h);
      out.max_rel_err = std::max(out.max_rel_err, gradient_rel_err(grad[i], fd));
      ++out.coordinates;
    }
  }
  return out;
}

}  // namespace sigmaforge::testing
