#include "sigmaforge/models.hpp"

#include "sigmaforge/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sigmaforge {

using nlohmann::json;

std::string canonical_model_name(const ModelSpec& spec) {
  switch (spec.family) {
    case ModelFamily::SigmaCell: return std::string(to_string(spec.cell.variant));
    case ModelFamily::Har: return "har";
    case ModelFamily::LogSv: return "logsv";
    case ModelFamily::Garch:
      switch (spec.garch) {
        case GarchVariant::Garch: return "garch11";
        case GarchVariant::Egarch: return "egarch";
        case GarchVariant::Tarch: return "tarch";
        case GarchVariant::Gjr: return "gjr-garch";
      }
  }
  return "model";
}

namespace {

template <class T>
T get_field(const json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path + "." + key + ": " + e.what());
  }
}

InferenceMode parse_inference(const json& j, const std::string& path) {
  InferenceMode mode;
  if (j.is_string() && j.get<std::string>() == "deterministic") return mode;
  if (j.is_object() && j.size() == 1 && j.contains("monte_carlo")) {
    mode.kind = InferenceMode::Kind::MonteCarlo;
    mode.samples = get_field<int>(j, "monte_carlo", path);
    return mode;
  }
  fail(ErrorKind::Config, path + ": expected \"deterministic\" or {\"monte_carlo\": K}");
}

json inference_json(const InferenceMode& m) {
  if (m.kind == InferenceMode::Kind::Deterministic) return "deterministic";
  return json{{"monte_carlo", m.samples}};
}

json cell_config_json(const SigmaCellConfig& c) {
  return json{{"variant", std::string(to_string(c.variant))},
              {"hidden", c.hidden},
              {"residual_hidden", c.residual_hidden},
              {"beta_act", c.beta_act},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"clip_norm", c.clip_norm},
              {"seed", c.seed},
              {"variance_floor", c.variance_floor},
              {"inference", inference_json(c.inference)},
              {"init_draws", c.init_draws},
              {"patience", c.patience},
              {"tolerance", c.tolerance}};
}

// Applies the keys of `j` other than those in `skip` to `c`.
void apply_cell_settings(SigmaCellConfig& c, const json& j, const std::string& path, const std::set<std::string>& skip) {
  for (const auto& [key, value] : j.items()) {
    if (skip.count(key)) continue;
    const std::string where = path + "." + key;
    try {
      if (key == "variant") c.variant = parse_cell_variant(value.get<std::string>());
      else if (key == "hidden") c.hidden = value.get<int>();
      else if (key == "residual_hidden") c.residual_hidden = value.get<int>();
      else if (key == "beta_act") c.beta_act = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "variance_floor") c.variance_floor = value.get<double>();
      else if (key == "inference") c.inference = parse_inference(value, where);
      else if (key == "init_draws") c.init_draws = value.get<int>();
      else if (key == "patience") c.patience = value.get<int>();
      else if (key == "tolerance") c.tolerance = value.get<double>();
      else fail(ErrorKind::Config, where + ": unknown sigma-cell setting");
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, where + ": " + e.what());
    }
  }
}

ModelSpec spec_from_name(const std::string& name, const std::string& path) {
  ModelSpec s;
  std::string lower = name;
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower.starts_with("sigma-cell")) {
    s.family = ModelFamily::SigmaCell;
    try {
      s.cell.variant = parse_cell_variant(lower);
    } catch (const Error&) {
      fail(ErrorKind::Config, path + ": unknown model '" + name + "'");
    }
  } else if (lower == "har") {
    s.family = ModelFamily::Har;
  } else if (lower == "logsv" || lower == "sv") {
    s.family = ModelFamily::LogSv;
  } else {
    try {
      s.family = ModelFamily::Garch;
      s.garch = parse_garch_variant(lower);
    } catch (const Error&) {
      fail(ErrorKind::Config, path + ": unknown model '" + name + "'");
    }
  }
  s.label = canonical_model_name(s);
  return s;
}

}  // namespace

ModelSpec parse_model_spec(const json& j, std::uint64_t default_seed, const std::string& path) {
  ModelSpec spec;
  if (j.is_string()) {
    spec = spec_from_name(j.get<std::string>(), path);
  } else if (j.is_object()) {
    spec = spec_from_name(get_field<std::string>(j, "name", path), path + ".name");
    if (j.contains("label")) spec.label = get_field<std::string>(j, "label", path);
    if (spec.family == ModelFamily::SigmaCell) {
      const auto variant = spec.cell.variant;
      spec.cell.seed = default_seed;
      apply_cell_settings(spec.cell, j, path, {"name", "label"});
      spec.cell.variant = variant;
    } else {
      for (const auto& [key, value] : j.items())
        if (key != "name" && key != "label") fail(ErrorKind::Config, path + "." + key + ": not a setting of this model");
    }
    if (spec.family == ModelFamily::SigmaCell) {
      try {
        spec.cell.validate();
      } catch (const Error& e) {
        fail(ErrorKind::Config, path + ": " + e.what());
      }
    }
    return spec;
  } else {
    fail(ErrorKind::Config, path + ": expected a model name or object");
  }
  spec.cell.seed = default_seed;
  return spec;
}

FittedModel fit_model(const ModelSpec& spec, const FitData& data) {
  FittedModel out;
  out.label = spec.label.empty() ? canonical_model_name(spec) : spec.label;
  switch (spec.family) {
    case ModelFamily::SigmaCell: {
      auto res = fit(spec.cell, as_span(data.returns), as_span(data.valid_returns));
      out.state = std::move(res.model);
      break;
    }
    case ModelFamily::Garch: {
      const auto f = fit_garch(data.returns, spec.garch);
      out.state = GarchModel{f.params, f.init_variance, f.loglik};
      break;
    }
    case ModelFamily::Har: {
      if (data.rv.size() == 0) fail(ErrorKind::InvalidInput, "HAR needs a realized-volatility series");
      out.state = HarModel{fit_har(VolSeries(data.rv))};
      break;
    }
    case ModelFamily::LogSv: {
      const auto f = fit_logsv(data.returns);
      out.state = LogSvModel{f.params, f.loglik};
      break;
    }
  }
  return out;
}

VolSeries forecast_model(const FittedModel& model, const DailyData& data) {
  const auto& r = data.returns.values();
  const auto& index = data.returns.index();
  return std::visit(
      [&](const auto& m) -> VolSeries {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SigmaCellModel>) {
          return forecast(m, data.returns);
        } else if constexpr (std::is_same_v<T, GarchModel>) {
          return VolSeries(index, garch_filter(m.params, r, m.init_variance).cwiseSqrt());
        } else if constexpr (std::is_same_v<T, HarModel>) {
          return har_forecast(m.params, data.rv);
        } else {
          return VolSeries(index, logsv_filter(m.params, r));
        }
      },
      model.state);
}

json to_json(const FittedModel& model) {
  json j{{"format", kModelFormat}, {"format_version", kModelFormatVersion}, {"label", model.label}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SigmaCellModel>) {
          j["family"] = "sigma-cell";
          j["config"] = cell_config_json(m.config);
          j["init_variance"] = m.init_variance;
          json blocks = json::array();
          for (const auto& b : m.layout()) {
            std::vector<double> values(m.params.data() + b.offset, m.params.data() + b.offset + b.size());
            blocks.push_back(json{{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"values", values}});
          }
          j["blocks"] = std::move(blocks);
          const auto& t = m.training;
          j["training"] = json{{"epochs_run", t.epochs_run},
                               {"initial_train_loss", t.initial_train_loss},
                               {"final_train_loss", t.final_train_loss},
                               {"last_epoch_loss", t.last_epoch_loss},
                               {"best_valid_loss", t.best_valid_loss},
                               {"best_epoch", t.best_epoch},
                               {"lr_halvings", t.lr_halvings}};
        } else if constexpr (std::is_same_v<T, GarchModel>) {
          j["family"] = "garch";
          j["params"] = json{{"variant", std::string(to_string(m.params.variant))},
                             {"omega", m.params.omega},
                             {"alpha", m.params.alpha},
                             {"beta", m.params.beta},
                             {"gamma", m.params.gamma}};
          j["init_variance"] = m.init_variance;
          j["loglik"] = m.loglik;
        } else if constexpr (std::is_same_v<T, HarModel>) {
          j["family"] = "har";
          j["params"] = json{{"c", m.params.c}, {"beta_d", m.params.beta_d}, {"beta_w", m.params.beta_w}, {"beta_m", m.params.beta_m}};
        } else {
          j["family"] = "logsv";
          j["params"] = json{{"mu", m.params.mu}, {"phi", m.params.phi}, {"sigma", m.params.sigma}};
          j["loglik"] = m.loglik;
        }
      },
      model.state);
  return j;
}

FittedModel model_from_json(const json& j) {
  const std::string path = "model";
  if (!j.is_object() || j.value("format", std::string()) != kModelFormat)
    fail(ErrorKind::InvalidInput, "not a sigma-forge model file");
  if (get_field<int>(j, "format_version", path) != kModelFormatVersion)
    fail(ErrorKind::InvalidInput, "unsupported model format version");
  FittedModel out;
  out.label = get_field<std::string>(j, "label", path);
  const auto family = get_field<std::string>(j, "family", path);
  if (family == "sigma-cell") {
    SigmaCellModel m;
    apply_cell_settings(m.config, j.at("config"), path + ".config", {});
    m.config.validate();
    m.init_variance = get_field<double>(j, "init_variance", path);
    m.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(m.config)));
    const auto layout = m.layout();
    const auto& blocks = j.at("blocks");
    if (blocks.size() != layout.size()) fail(ErrorKind::Shape, "model blocks do not match the configured layout");
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const auto& b = layout[k];
      const auto& jb = blocks[k];
      const auto values = get_field<std::vector<double>>(jb, "values", path + ".blocks");
      if (get_field<std::string>(jb, "name", path + ".blocks") != b.name || get_field<int>(jb, "rows", path) != b.rows ||
          get_field<int>(jb, "cols", path) != b.cols || static_cast<int>(values.size()) != b.size())
        fail(ErrorKind::Shape, "block '" + b.name + "' does not match the configured layout");
      for (int i = 0; i < b.size(); ++i) m.params[b.offset + i] = values[static_cast<std::size_t>(i)];
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      m.training.epochs_run = t.value("epochs_run", 0);
      m.training.initial_train_loss = t.value("initial_train_loss", 0.0);
      m.training.final_train_loss = t.value("final_train_loss", 0.0);
      m.training.last_epoch_loss = t.value("last_epoch_loss", 0.0);
      m.training.best_valid_loss = t.value("best_valid_loss", 0.0);
      m.training.best_epoch = t.value("best_epoch", 0);
      m.training.lr_halvings = t.value("lr_halvings", 0);
    }
    out.state = std::move(m);
  } else if (family == "garch") {
    const auto& p = j.at("params");
    GarchModel m;
    m.params.variant = parse_garch_variant(get_field<std::string>(p, "variant", path + ".params"));
    m.params.omega = get_field<double>(p, "omega", path + ".params");
    m.params.alpha = get_field<double>(p, "alpha", path + ".params");
    m.params.beta = get_field<double>(p, "beta", path + ".params");
    m.params.gamma = get_field<double>(p, "gamma", path + ".params");
    m.init_variance = get_field<double>(j, "init_variance", path);
    m.loglik = j.value("loglik", 0.0);
    out.state = m;
  } else if (family == "har") {
    const auto& p = j.at("params");
    out.state = HarModel{HarParams{get_field<double>(p, "c", path), get_field<double>(p, "beta_d", path),
                                   get_field<double>(p, "beta_w", path), get_field<double>(p, "beta_m", path)}};
  } else if (family == "logsv") {
    const auto& p = j.at("params");
    out.state = LogSvModel{SvParams{get_field<double>(p, "mu", path), get_field<double>(p, "phi", path),
                                    get_field<double>(p, "sigma", path)},
                           j.value("loglik", 0.0)};
  } else {
    fail(ErrorKind::InvalidInput, "unknown model family '" + family + "'");
  }
  return out;
}

void save_model(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
}

FittedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace sigmaforge
