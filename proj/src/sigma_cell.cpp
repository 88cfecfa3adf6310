#include "sigmaforge/sigma_cell.hpp"

#include "sigmaforge/nn.hpp"
#include "sigmaforge/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace sigmaforge {

std::string_view to_string(CellVariant v) noexcept {
  switch (v) {
    case CellVariant::Base: return "sigma-cell";
    case CellVariant::N: return "sigma-cell-n";
    case CellVariant::NTV: return "sigma-cell-ntv";
    case CellVariant::RL: return "sigma-cell-rl";
    case CellVariant::RLTV: return "sigma-cell-rltv";
  }
  return "sigma-cell";
}

CellVariant parse_cell_variant(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s.starts_with("sigma-cell")) s = s.size() == 10 ? "base" : s.substr(11);
  if (s == "base") return CellVariant::Base;
  if (s == "n") return CellVariant::N;
  if (s == "ntv") return CellVariant::NTV;
  if (s == "rl") return CellVariant::RL;
  if (s == "rltv") return CellVariant::RLTV;
  fail(ErrorKind::InvalidInput, "unknown sigma-cell variant '" + std::string(name) + "'");
}

void SigmaCellConfig::validate() const {
  if (hidden < 1) fail(ErrorKind::Config, "hidden size must be >= 1");
  if (has_residual_rnn(variant) && residual_hidden < 1) fail(ErrorKind::Config, "residual hidden size must be >= 1");
  if (!(lr > 0.0)) fail(ErrorKind::Config, "learning rate must be positive");
  if (!(variance_floor > 0.0)) fail(ErrorKind::Config, "variance floor must be positive");
  if (!(beta_act > 0.0)) fail(ErrorKind::Config, "activation beta must be positive");
  if (!(clip_norm > 0.0)) fail(ErrorKind::Config, "clip norm must be positive");
  if (epochs < 0) fail(ErrorKind::Config, "epochs must be non-negative");
  if (init_draws < 1) fail(ErrorKind::Config, "init_draws must be >= 1");
  if (inference.kind == InferenceMode::Kind::MonteCarlo && inference.samples < 1)
    fail(ErrorKind::Config, "Monte Carlo inference needs at least one sample");
}

std::vector<ParamBlock> param_layout(const SigmaCellConfig& cfg) {
  const int n = cfg.hidden;
  const int m = cfg.residual_hidden;
  std::vector<ParamBlock> blocks;
  int off = 0;
  auto add = [&](std::string name, int rows, int cols, bool residual, bool bias) {
    blocks.push_back(ParamBlock{std::move(name), rows, cols, off, residual, bias});
    off += rows * cols;
  };
  if (has_time_varying(cfg.variant)) {
    add("W", 1, 2 * n, false, false);
    add("b", 2 * n, 1, false, true);
  } else {
    add("W_s", 1, n, false, false);
    add("W_r", 1, n, false, false);
  }
  add("b_h", n, 1, false, true);
  add("W_o", n, 1, false, false);
  add("b_o", 1, 1, false, true);
  if (has_residual_rnn(cfg.variant)) {
    add("W_xh", 1, m, true, false);
    add("W_hh", m, m, true, false);
    add("b_res", m, 1, true, true);
    add("W_ho", m, 1, true, false);
    add("b_ores", 1, 1, true, true);
  }
  return blocks;
}

std::size_t param_count(const SigmaCellConfig& cfg) {
  std::size_t total = 0;
  for (const auto& b : param_layout(cfg)) total += static_cast<std::size_t>(b.size());
  return total;
}

Eigen::MatrixXd SigmaCellModel::block(std::string_view name) const {
  for (const auto& b : layout()) {
    if (b.name == name) return Eigen::Map<const Eigen::MatrixXd>(params.data() + b.offset, b.rows, b.cols);
  }
  fail(ErrorKind::InvalidInput, "no parameter block named '" + std::string(name) + "'");
}

double nll_loss(std::span<const double> variance, std::span<const double> returns, std::span<const double> mean,
                double floor) {
  return nll_sum<double>(variance, returns, mean, floor);
}

Eigen::VectorXd init_params(const SigmaCellConfig& cfg, std::uint64_t seed, std::uint64_t draw) {
  Rng rng = Rng::substream(seed, 100 + draw);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(cfg)));
  for (const auto& b : param_layout(cfg)) {
    if (b.bias) continue;
    const Eigen::MatrixXd w = nn::xavier_uniform(static_cast<std::size_t>(b.rows), static_cast<std::size_t>(b.cols), rng);
    p.segment(b.offset, b.size()) = w.reshaped();
  }
  return p;
}

std::vector<double> draw_noise(const SigmaCellConfig& cfg, std::size_t length, Rng& rng) {
  if (!has_noise(cfg.variant)) return {};
  std::vector<double> eps(length);
  for (auto& e : eps) e = rng.normal();
  return eps;
}

LossProgram build_loss_program(const SigmaCellConfig& cfg, const Eigen::VectorXd& params,
                               std::span<const double> returns, double init_variance) {
  LossProgram prog;
  auto& tape = prog.tape;
  tape.reserve(returns.size() * (40 * static_cast<std::size_t>(cfg.hidden) +
                                 (has_residual_rnn(cfg.variant) ? 3 * static_cast<std::size_t>(cfg.residual_hidden) *
                                                                      static_cast<std::size_t>(cfg.residual_hidden + 3)
                                                                : 0)));
  Vec<ad::Var> p(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) p[i] = tape.param(static_cast<std::size_t>(i), params[i]);
  std::vector<ad::Var> noise;
  if (has_noise(cfg.variant)) {
    noise.reserve(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) noise.push_back(tape.input(t, 0.0));
    prog.num_noise = returns.size();
  }
  auto seq = run_sequence<ad::Var>(cfg, p, returns, std::span<const ad::Var>(noise), init_variance);
  const ad::Var loss = nll_sum<ad::Var>(seq.variance, returns, seq.mean, cfg.variance_floor);
  tape.set_output(loss);
  return prog;
}

namespace {

double sample_variance(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

/// Deterministic (noise-free) loss over returns[begin, end) after running
/// the recursion from the start of `returns`.
double deterministic_loss(const SigmaCellConfig& cfg, const Eigen::VectorXd& params, std::span<const double> returns,
                          double init_variance, std::size_t begin, std::size_t end) {
  auto seq = run_sequence<double>(cfg, params, returns, {}, init_variance);
  return nll_sum<double>(seq.variance, returns, seq.mean, cfg.variance_floor, begin, end);
}

}  // namespace

FitResult fit(const SigmaCellConfig& cfg, std::span<const double> train, std::span<const double> valid) {
  cfg.validate();
  if (train.size() < 30) fail(ErrorKind::InsufficientData, "sigma-cell training needs at least 30 returns");

  const double init_var = sample_variance(train);
  double scale = 0.0;
  for (double v : train) scale = std::max(scale, std::abs(v));
  if (!(init_var > 1e-28 * scale * scale)) fail(ErrorKind::Degenerate, "training returns have zero variance");

  std::vector<double> full(train.begin(), train.end());
  full.insert(full.end(), valid.begin(), valid.end());
  const std::size_t n_train = train.size();

  // Signed Xavier output weights with a zero output bias can leave the ReLU
  // output at the floor for most of the sample, where the loss has no
  // gradient; start from the best of several draws.
  Eigen::VectorXd params = init_params(cfg, cfg.seed, 0);
  double init_loss = std::numeric_limits<double>::infinity();
  for (int d = 0; d < std::max(cfg.init_draws, 1); ++d) {
    Eigen::VectorXd candidate = init_params(cfg, cfg.seed, static_cast<std::uint64_t>(d));
    const double l = deterministic_loss(cfg, candidate, train, init_var, 0, n_train);
    if (l < init_loss) {
      init_loss = l;
      params = std::move(candidate);
    }
  }
  const auto n_params = params.size();
  Rng noise_rng = Rng::substream(cfg.seed, 1);
  LossProgram program = build_loss_program(cfg, params, train, init_var);

  Eigen::VectorXd variance_mask = Eigen::VectorXd::Ones(n_params);
  Eigen::VectorXd residual_mask = Eigen::VectorXd::Zero(n_params);
  for (const auto& b : param_layout(cfg)) {
    if (b.residual) {
      variance_mask.segment(b.offset, b.size()).setZero();
      residual_mask.segment(b.offset, b.size()).setOnes();
    }
  }
  const bool two_phase = has_residual_rnn(cfg.variant);

  nn::AdamState adam(n_params, nn::AdamHyper{cfg.lr});
  Eigen::VectorXd grads(n_params);
  Eigen::VectorXd best_params = params;
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  FitResult result;
  TrainingInfo info;
  int quiet_epochs = 0;
  double prev_loss = std::numeric_limits<double>::quiet_NaN();

  auto score_of = [&](const Eigen::VectorXd& p, double tape_loss) {
    if (!valid.empty()) return deterministic_loss(cfg, p, full, init_var, n_train, full.size());
    if (!has_noise(cfg.variant)) return tape_loss;
    return deterministic_loss(cfg, p, train, init_var, 0, n_train);
  };

  bool just_halved = false;
  int epoch = 0;
  for (; epoch <= cfg.epochs; ++epoch) {
    double loss = 0.0;
    double score = 0.0;
    bool finite = true;
    try {
      if (program.num_noise > 0) program.tape.set_inputs(draw_noise(cfg, program.num_noise, noise_rng));
      loss = program.tape.forward(as_span(params));
      program.tape.backward(std::span<double>(grads.data(), static_cast<std::size_t>(n_params)));
      score = score_of(params, loss);
      finite = std::isfinite(loss) && std::isfinite(score) && grads.allFinite();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      finite = false;
    }
    if (!finite) {
      if (just_halved) {
        fail(ErrorKind::TrainingDiverged,
             "non-finite loss at epoch " + std::to_string(epoch) + " after halving the learning rate");
      }
      just_halved = true;
      ++info.lr_halvings;
      adam = nn::AdamState(n_params, nn::AdamHyper{adam.hyper.lr * 0.5});
      params = best_params;
      continue;
    }
    just_halved = false;

    info.last_epoch_loss = loss;
    result.train_loss.push_back(loss);
    result.valid_loss.push_back(score);
    if (score < best_score) {
      best_score = score;
      best_params = params;
      best_epoch = epoch;
    }
    if (epoch == cfg.epochs) break;

    if (std::isfinite(prev_loss) && std::abs(loss - prev_loss) <= cfg.tolerance * std::abs(prev_loss)) {
      if (++quiet_epochs >= cfg.patience) break;
    } else {
      quiet_epochs = 0;
    }
    prev_loss = loss;

    if (two_phase) {
      const Eigen::VectorXd& mask = (epoch % 2 == 0) ? variance_mask : residual_mask;
      grads.array() *= mask.array();
      nn::clip_by_global_norm(grads, cfg.clip_norm);
      nn::adam_update(adam, params, grads, mask);
    } else {
      nn::clip_by_global_norm(grads, cfg.clip_norm);
      nn::adam_update(adam, params, grads);
    }
  }

  info.epochs_run = static_cast<int>(result.train_loss.size());
  info.initial_train_loss = init_loss;
  info.final_train_loss = deterministic_loss(cfg, best_params, train, init_var, 0, n_train);
  info.best_valid_loss = best_score;
  info.best_epoch = best_epoch;
  result.model = SigmaCellModel{cfg, best_params, init_var, info};
  return result;
}

Eigen::VectorXd forecast_sigma(const SigmaCellModel& model, std::span<const double> returns) {
  const auto& cfg = model.config;
  const auto n = static_cast<Eigen::Index>(returns.size());
  if (cfg.inference.kind == InferenceMode::Kind::Deterministic || !has_noise(cfg.variant)) {
    auto seq = run_sequence<double>(cfg, model.params, returns, {}, model.init_variance);
    return Eigen::Map<const Eigen::VectorXd>(seq.variance.data(), n).cwiseSqrt();
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < cfg.inference.samples; ++k) {
    Rng rng = Rng::substream(cfg.seed, 1000 + static_cast<std::uint64_t>(k));
    const auto eps = draw_noise(cfg, returns.size(), rng);
    auto seq = run_sequence<double>(cfg, model.params, returns, eps, model.init_variance);
    acc += Eigen::Map<const Eigen::VectorXd>(seq.variance.data(), n).cwiseSqrt();
  }
  return acc / static_cast<double>(cfg.inference.samples);
}

VolSeries forecast(const SigmaCellModel& model, const ReturnSeries& returns) {
  return VolSeries(returns.index(), forecast_sigma(model, as_span(returns.values())));
}

}  // namespace sigmaforge
