#pragma once

#include "sigmaforge/baselines.hpp"
#include "sigmaforge/sigma_cell.hpp"
#include "sigmaforge/timeseries.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <variant>

namespace sigmaforge {

enum class ModelFamily { SigmaCell, Garch, Har, LogSv };

/// What to fit: a family plus its settings. `label` names the model in
/// tables and defaults to the canonical model name.
struct ModelSpec {
  std::string label;
  ModelFamily family = ModelFamily::Garch;
  GarchVariant garch = GarchVariant::Garch;
  SigmaCellConfig cell;
};

/// Canonical names: sigma-cell, sigma-cell-{n,ntv,rl,rltv}, garch11, egarch,
/// tarch, gjr-garch, har, logsv.
std::string canonical_model_name(const ModelSpec& spec);

/// Parses a model name, or an object {"name": ..., "label": ..., plus
/// sigma-cell settings}. `default_seed` seeds sigma-cells that set none.
/// Unknown keys are rejected with the offending field path.
ModelSpec parse_model_spec(const nlohmann::json& j, std::uint64_t default_seed, const std::string& path = "model");

struct GarchModel {
  GarchParams params;
  double init_variance = 1.0;
  double loglik = 0.0;
};

struct HarModel {
  HarParams params;
};

struct LogSvModel {
  SvParams params;
  double loglik = 0.0;
};

struct FittedModel {
  std::string label;
  std::variant<SigmaCellModel, GarchModel, HarModel, LogSvModel> state;
};

/// Training data for one fit. `rv` is needed by HAR only.
struct FitData {
  Eigen::VectorXd returns;
  Eigen::VectorXd rv;
  /// Held-out continuation used by sigma-cells for model selection.
  Eigen::VectorXd valid_returns;
};

FittedModel fit_model(const ModelSpec& spec, const FitData& data);

/// One-step-ahead sigma forecasts over a series that starts where the
/// training sample started. Entry t forecasts day t from days < t. HAR has
/// no forecast for day 0, so its output is one shorter and starts at day 1.
VolSeries forecast_model(const FittedModel& model, const DailyData& data);

/// JSON envelope; doubles round-trip exactly.
nlohmann::json to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

inline constexpr const char* kModelFormat = "sigma-forge-model";
inline constexpr int kModelFormatVersion = 1;

}  // namespace sigmaforge
