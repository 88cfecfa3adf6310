#pragma once

#include "sigmaforge/ad.hpp"
#include "sigmaforge/error.hpp"
#include "sigmaforge/rng.hpp"
#include "sigmaforge/timeseries.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sigmaforge {

enum class CellVariant { Base, N, NTV, RL, RLTV };

std::string_view to_string(CellVariant v) noexcept;
/// Accepts "base"/"n"/"ntv"/"rl"/"rltv" and the model names
/// "sigma-cell", "sigma-cell-n", ... (case-insensitive).
CellVariant parse_cell_variant(std::string_view name);

constexpr bool has_noise(CellVariant v) noexcept { return v == CellVariant::N || v == CellVariant::NTV; }
constexpr bool has_residual_rnn(CellVariant v) noexcept { return v == CellVariant::RL || v == CellVariant::RLTV; }
constexpr bool has_time_varying(CellVariant v) noexcept { return v == CellVariant::NTV || v == CellVariant::RLTV; }

struct InferenceMode {
  enum class Kind { Deterministic, MonteCarlo };
  Kind kind = Kind::Deterministic;
  int samples = 1;  // K for MonteCarlo
};

struct SigmaCellConfig {
  CellVariant variant = CellVariant::Base;
  int hidden = 10;           // n
  int residual_hidden = 10;  // m, RL/RLTV only
  double beta_act = 1.0;     // adjusted softplus shape
  double lr = 0.1;
  int epochs = 600;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  double variance_floor = 1e-8;
  InferenceMode inference;
  int init_draws = 10;  // Xavier candidates; the lowest initial loss is kept
  int patience = 10;    // epochs of |dL|/|L| < tolerance before stopping
  double tolerance = 1e-6;

  void validate() const;
};

/// A named slice of the flat parameter vector. Matrices are stored
/// column-major with `rows` = fan-in and `cols` = fan-out.
struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  int offset = 0;
  bool residual = false;  // belongs to the residual RNN G
  bool bias = false;

  int size() const noexcept { return rows * cols; }
};

/// Block layout for a configuration. Order:
///   Base/N/RL : W_s, W_r, b_h, W_o, b_o
///   NTV/RLTV  : W, b (weight generator), b_h, W_o, b_o
///   RL/RLTV   : followed by W_xh, W_hh, b_res, W_ho, b_ores
std::vector<ParamBlock> param_layout(const SigmaCellConfig& cfg);

std::size_t param_count(const SigmaCellConfig& cfg);

struct TrainingInfo {
  int epochs_run = 0;
  // Noise-free training loss at the initial and the returned parameters.
  double initial_train_loss = 0;
  double final_train_loss = 0;
  double last_epoch_loss = 0;  // tape loss of the last epoch
  double best_valid_loss = 0;
  int best_epoch = 0;
  int lr_halvings = 0;  // non-finite epochs recovered by halving the learning rate
};

struct SigmaCellModel {
  SigmaCellConfig config;
  Eigen::VectorXd params;
  double init_variance = 1.0;  // training-sample variance used to seed the state
  TrainingInfo training;

  std::vector<ParamBlock> layout() const { return param_layout(config); }
  /// Copy of one block as a rows x cols matrix.
  Eigen::MatrixXd block(std::string_view name) const;
};

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct CellState {
  Vec<S> hidden_var;  // sigma~^2, length n
  Vec<S> h;           // residual RNN hidden, length m (empty otherwise)
  S prev_var;         // sigma^2 of the previous step
};

template <class S>
struct StepOutput {
  CellState<S> state;
  S variance;
  S mean;      // g_t
  S residual;  // x~_{t-1}
};

template <class S>
struct SequenceOutput {
  std::vector<S> variance;
  std::vector<S> mean;
  std::vector<S> residual;
};

namespace cell_detail {

inline double act_as(double x, double beta) { return adjusted_softplus(x, beta); }
inline ad::Var act_as(const ad::Var& x, double beta) { return ad::adjusted_softplus(x, beta); }
inline double act_relu(double x) { return relu(x); }
inline ad::Var act_relu(const ad::Var& x) { return ad::relu(x); }
inline double act_sigmoid(double x) { return sigmoid(x); }
inline ad::Var act_sigmoid(const ad::Var& x) { return ad::sigmoid(x); }
inline double act_floor(double x, double lo) { return floor_at(x, lo); }
inline ad::Var act_floor(const ad::Var& x, double lo) { return ad::floor_at(x, lo); }
inline double act_tanh(double x) { return std::tanh(x); }
inline ad::Var act_tanh(const ad::Var& x) { return ad::tanh(x); }
inline double act_sqrt(double x) { return std::sqrt(x); }
inline ad::Var act_sqrt(const ad::Var& x) { return ad::sqrt(x); }
inline double act_log(double x) { return std::log(x); }
inline ad::Var act_log(const ad::Var& x) { return ad::log(x); }
inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const ad::Var& x) { return std::isfinite(x.val); }

}  // namespace cell_detail

/// Read-only view of a flat parameter vector split into the cell's blocks.
template <class S>
class CellWeights {
 public:
  CellWeights(const SigmaCellConfig& cfg, const Vec<S>& flat) : cfg_(cfg), flat_(flat) {
    const int n = cfg.hidden;
    const int m = cfg.residual_hidden;
    int off = 0;
    auto take = [&](int len) {
      const int o = off;
      off += len;
      return o;
    };
    if (has_time_varying(cfg.variant)) {
      gen_w_ = take(2 * n);
      gen_b_ = take(2 * n);
    } else {
      w_s_ = take(n);
      w_r_ = take(n);
    }
    b_h_ = take(n);
    w_o_ = take(n);
    b_o_ = take(1);
    if (has_residual_rnn(cfg.variant)) {
      w_xh_ = take(m);
      w_hh_ = take(m * m);
      b_res_ = take(m);
      w_ho_ = take(m);
      b_ores_ = take(1);
    }
    if (off != flat.size()) fail(ErrorKind::Shape, "parameter vector does not match the cell layout");
  }

  auto seg(int off, int len) const { return flat_.segment(off, len); }
  auto w_s() const { return seg(w_s_, cfg_.hidden); }
  auto w_r() const { return seg(w_r_, cfg_.hidden); }
  auto gen_w() const { return seg(gen_w_, 2 * cfg_.hidden); }
  auto gen_b() const { return seg(gen_b_, 2 * cfg_.hidden); }
  auto b_h() const { return seg(b_h_, cfg_.hidden); }
  auto w_o() const { return seg(w_o_, cfg_.hidden); }
  const S& b_o() const { return flat_[b_o_]; }
  auto w_xh() const { return seg(w_xh_, cfg_.residual_hidden); }
  auto w_hh() const {
    return Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>(
        flat_.data() + w_hh_, cfg_.residual_hidden, cfg_.residual_hidden);
  }
  auto b_res() const { return seg(b_res_, cfg_.residual_hidden); }
  auto w_ho() const { return seg(w_ho_, cfg_.residual_hidden); }
  const S& b_ores() const { return flat_[b_ores_]; }

 private:
  const SigmaCellConfig& cfg_;
  const Vec<S>& flat_;
  int w_s_ = 0, w_r_ = 0, gen_w_ = 0, gen_b_ = 0, b_h_ = 0, w_o_ = 0, b_o_ = 0;
  int w_xh_ = 0, w_hh_ = 0, b_res_ = 0, w_ho_ = 0, b_ores_ = 0;
};

template <class S>
CellState<S> initial_state(const SigmaCellConfig& cfg, double init_variance) {
  CellState<S> st;
  st.hidden_var = Vec<S>::Constant(cfg.hidden, S(init_variance));
  st.h = has_residual_rnn(cfg.variant) ? Vec<S>::Constant(cfg.residual_hidden, S(0.0)) : Vec<S>();
  st.prev_var = S(init_variance);
  return st;
}

/// One step of the recursion: consumes x_{t-1} and the noise draw for step t,
/// returns sigma_t^2 (floored at the variance floor) and g_t.
template <class S>
StepOutput<S> cell_step(const SigmaCellConfig& cfg, const CellWeights<S>& w, const CellState<S>& state,
                        const S& x_prev, const S& noise) {
  using namespace cell_detail;
  const CellVariant v = cfg.variant;
  StepOutput<S> out;
  out.mean = S(0.0);
  out.state.h = state.h;

  S x_tilde = x_prev;
  if (has_residual_rnn(v)) {
    Vec<S> pre = w.w_hh().transpose() * state.h + w.w_xh() * x_prev + w.b_res();
    out.state.h = pre.unaryExpr([](const S& z) { return act_tanh(z); });
    out.mean = act_tanh(S(w.w_ho().dot(out.state.h)) + w.b_ores());
    x_tilde = x_prev - out.mean;
  } else if (has_noise(v)) {
    x_tilde = x_prev - act_sqrt(state.prev_var) * noise;
  }
  out.residual = x_tilde;
  const S x2 = x_tilde * x_tilde;

  Vec<S> pre;
  if (has_time_varying(v)) {
    const Vec<S> gen = (w.gen_w() * x_prev + w.gen_b()).unaryExpr([](const S& z) { return act_sigmoid(z); });
    const int n = cfg.hidden;
    pre = state.hidden_var.cwiseProduct(gen.head(n)) + gen.tail(n) * x2 + w.b_h();
  } else {
    pre = state.hidden_var.cwiseProduct(w.w_s()) + w.w_r() * x2 + w.b_h();
  }
  const double beta = cfg.beta_act;
  out.state.hidden_var = pre.unaryExpr([beta](const S& z) { return act_as(z, beta); });
  out.variance = act_floor(act_relu(S(w.w_o().dot(out.state.hidden_var)) + w.b_o()), cfg.variance_floor);
  out.state.prev_var = out.variance;
  if (!is_finite(out.variance) || !is_finite(out.mean)) fail(ErrorKind::NonFinite, "non-finite cell state");
  return out;
}

/// Folds cell_step over the returns. sigma_t^2 uses x_0..x_{t-1}; the first
/// step sees x_{-1} = 0. `noise` is either empty (treated as zeros) or has
/// one entry per step.
template <class S>
SequenceOutput<S> run_sequence(const SigmaCellConfig& cfg, const Vec<S>& params, std::span<const double> returns,
                               std::span<const S> noise, double init_variance) {
  if (returns.empty()) fail(ErrorKind::InsufficientData, "run_sequence needs at least one return");
  if (!noise.empty() && noise.size() != returns.size()) fail(ErrorKind::Shape, "noise length differs from returns");
  const CellWeights<S> w(cfg, params);
  CellState<S> st = initial_state<S>(cfg, init_variance);
  SequenceOutput<S> seq;
  seq.variance.reserve(returns.size());
  seq.mean.reserve(returns.size());
  seq.residual.reserve(returns.size());
  const S zero(0.0);
  for (std::size_t t = 0; t < returns.size(); ++t) {
    const S x_prev(t == 0 ? 0.0 : returns[t - 1]);
    auto step = cell_step<S>(cfg, w, st, x_prev, noise.empty() ? zero : noise[t]);
    seq.variance.push_back(step.variance);
    seq.mean.push_back(step.mean);
    seq.residual.push_back(step.residual);
    st = std::move(step.state);
  }
  return seq;
}

/// sum_t [ln sigma_t^2 + (x_t - g_t)^2 / sigma_t^2] over t in [begin, end),
/// with sigma_t^2 floored at `floor`.
template <class S>
S nll_sum(std::span<const S> variance, std::span<const double> returns, std::span<const S> mean, double floor,
          std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1)) {
  using namespace cell_detail;
  if (variance.size() != returns.size() || mean.size() != returns.size())
    fail(ErrorKind::Shape, "loss inputs have different lengths");
  end = std::min(end, returns.size());
  S total(0.0);
  for (std::size_t t = begin; t < end; ++t) {
    const S var = act_floor(variance[t], floor);
    const S e = S(returns[t]) - mean[t];
    total = total + act_log(var) + e * e / var;
  }
  return total;
}

/// Gaussian NLL loss (without the 2*pi constant) for plain vectors.
double nll_loss(std::span<const double> variance, std::span<const double> returns, std::span<const double> mean,
                double floor = 1e-8);

/// Xavier-uniform weights and zero biases, drawn from substream `draw` of
/// `seed`.
Eigen::VectorXd init_params(const SigmaCellConfig& cfg, std::uint64_t seed, std::uint64_t draw = 0);

/// Standard-normal noise path for one pass (empty for variants without noise).
std::vector<double> draw_noise(const SigmaCellConfig& cfg, std::size_t length, Rng& rng);

/// Loss tape of one model on `returns` with noise as tape inputs.
struct LossProgram {
  ad::Tape tape;
  std::size_t num_noise = 0;
};
LossProgram build_loss_program(const SigmaCellConfig& cfg, const Eigen::VectorXd& params,
                               std::span<const double> returns, double init_variance);

struct FitResult {
  SigmaCellModel model;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> valid_loss;  // per epoch (deterministic pass)
};

/// Full-sequence BPTT with Adam, global-norm clipping and, for RL/RLTV,
/// alternating epochs between the variance block and the residual-RNN block.
/// Returns the parameters with the best validation loss (training loss when
/// `valid` is empty).
FitResult fit(const SigmaCellConfig& cfg, std::span<const double> train, std::span<const double> valid = {});

/// sigma_hat_t = sqrt(sigma_t^2) over `returns`, starting from the model's
/// initial state.
Eigen::VectorXd forecast_sigma(const SigmaCellModel& model, std::span<const double> returns);
VolSeries forecast(const SigmaCellModel& model, const ReturnSeries& returns);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace sigmaforge
