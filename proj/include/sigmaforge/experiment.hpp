#pragma once

#include "sigmaforge/models.hpp"
#include "sigmaforge/stats_tests.hpp"
#include "sigmaforge/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sigmaforge {

#ifndef SIGMA_FORGE_VERSION
#define SIGMA_FORGE_VERSION "0.0.0"
#endif
inline constexpr const char* kVersion = SIGMA_FORGE_VERSION;

struct DataSourceConfig {
  enum class Kind { SineSynthetic, GarchSynthetic, DailyCsv, IntradayCsv };
  Kind kind = Kind::SineSynthetic;
  SineVolConfig sine;
  double omega = 0.1, alpha = 0.1, beta = 0.8;  // GarchSynthetic
  std::size_t n = 2000;                        // GarchSynthetic
  std::uint64_t seed = 0;                      // GarchSynthetic
  std::filesystem::path path;                  // CSV sources

  bool synthetic() const noexcept { return kind == Kind::SineSynthetic || kind == Kind::GarchSynthetic; }
};

struct DmConfig {
  std::string base;
  std::vector<LossKind> losses{LossKind::Mse, LossKind::Mad};
  bool small_sample_correction = false;
};

struct McsConfig {
  LossKind loss = LossKind::Mse;
  int bootstrap = 10000;
  int block_length = 0;
};

struct ExperimentConfig {
  nlohmann::json source;  // the parsed document, used for the config hash
  DataSourceConfig data;
  std::size_t valid = 252;
  std::size_t test = 252;
  std::vector<ModelSpec> models;
  std::vector<std::string> metrics;  // column names of the metric tables
  bool scale_1e3 = false;            // MAE/RMSE and losses reported x 1e3
  std::vector<DmConfig> dm;
  std::optional<McsConfig> mcs;
  bool encompassing = false;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output_dir;
};

/// Metric column names accepted in "metrics".
const std::vector<std::string>& known_metrics();

/// Validates and normalises a config document. Relative paths resolve
/// against `base_dir`. Errors name the offending field path.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical (sorted-key, compact) serialisation, as hex.
std::string config_hash(const nlohmann::json& j);

struct Table {
  std::string id;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string table_csv(const Table& t);

struct Report {
  std::vector<Table> tables;
  nlohmann::json summary;
  std::vector<FittedModel> models;
  std::vector<VolSeries> forecasts;  // parallel to models
};

/// CSV text of one table. Unknown ids raise an error listing the valid ones.
std::string emit_table(const Report& report, std::string_view id);

/// Loads data, fits, forecasts, evaluates and tests. When `out_dir` is
/// given, writes tables, summary.json, model JSONs, forecast CSVs and
/// manifest.json; on failure the manifest records the failing stage and the
/// error is rethrown tagged with that stage.
Report run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Loads the configured data source.
DailyData load_data(const DataSourceConfig& src);

}  // namespace sigmaforge
