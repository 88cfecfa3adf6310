#include "sigmaforge/experiment.hpp"

#include "sigmaforge/error.hpp"
#include "sigmaforge/metrics.hpp"
#include "sigmaforge/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sigmaforge {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names{"mae", "rmse", "hrmse", "qlike", "nll", "r2", "delta_mean", "delta_amplitude"};
  return names;
}

namespace {

const std::vector<std::string> kSyntheticMetrics{"rmse", "mae", "nll", "delta_mean", "delta_amplitude"};
const std::vector<std::string> kRealMetrics{"mae", "rmse", "hrmse", "qlike", "r2"};

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
  fail(ErrorKind::Config, path + ": " + msg);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) config_error(path + "." + key, "unknown field");
}

template <class T>
T field(const json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(path + "." + key, e.what());
  }
}

template <class T>
T field_or(const json& j, const std::string& key, const std::string& path, T fallback) {
  return j.contains(key) ? field<T>(j, key, path) : fallback;
}

LossKind parse_loss(const std::string& s, const std::string& path) {
  if (s == "mse") return LossKind::Mse;
  if (s == "mad") return LossKind::Mad;
  config_error(path, "loss must be \"mse\" or \"mad\"");
}

std::string loss_name(LossKind k) { return k == LossKind::Mse ? "mse" : "mad"; }

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DataSourceConfig parse_data(const json& j, const fs::path& base, std::uint64_t seed) {
  const std::string path = "data";
  check_keys(j, path, {"synthetic", "daily_csv", "intraday_csv"});
  if (j.size() != 1) config_error(path, "exactly one of synthetic, daily_csv, intraday_csv is required");
  DataSourceConfig d;
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    const std::string sp = path + ".synthetic";
    const auto process = field_or<std::string>(s, "process", sp, "sine");
    if (process == "sine") {
      check_keys(s, sp, {"process", "n", "amplitude", "half_period", "seed"});
      d.kind = DataSourceConfig::Kind::SineSynthetic;
      d.sine.n = field_or<std::size_t>(s, "n", sp, d.sine.n);
      d.sine.amplitude = field_or<double>(s, "amplitude", sp, d.sine.amplitude);
      d.sine.half_period = field_or<double>(s, "half_period", sp, d.sine.half_period);
      d.sine.seed = field_or<std::uint64_t>(s, "seed", sp, seed);
      if (d.sine.n < 2) config_error(sp + ".n", "must be >= 2");
      if (!(d.sine.amplitude >= 0.0 && d.sine.amplitude < 1.0)) config_error(sp + ".amplitude", "must be in [0, 1)");
      if (!(d.sine.half_period > 0.0)) config_error(sp + ".half_period", "must be positive");
    } else if (process == "garch11") {
      check_keys(s, sp, {"process", "n", "omega", "alpha", "beta", "seed"});
      d.kind = DataSourceConfig::Kind::GarchSynthetic;
      d.n = field_or<std::size_t>(s, "n", sp, d.n);
      d.omega = field_or<double>(s, "omega", sp, d.omega);
      d.alpha = field_or<double>(s, "alpha", sp, d.alpha);
      d.beta = field_or<double>(s, "beta", sp, d.beta);
      d.seed = field_or<std::uint64_t>(s, "seed", sp, seed);
    } else {
      config_error(sp + ".process", "must be \"sine\" or \"garch11\"");
    }
    return d;
  }
  const bool daily = j.contains("daily_csv");
  d.kind = daily ? DataSourceConfig::Kind::DailyCsv : DataSourceConfig::Kind::IntradayCsv;
  const std::string key = daily ? "daily_csv" : "intraday_csv";
  d.path = resolve(base, field<std::string>(j, key, path));
  if (!fs::exists(d.path)) config_error(path + "." + key, "file not found: " + d.path.string());
  return d;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "config", {"data", "split", "models", "metrics", "scale_1e3", "tests", "seed", "output_dir"});
  ExperimentConfig cfg;
  cfg.source = j;
  cfg.seed = field_or<std::uint64_t>(j, "seed", "config", 0);
  if (!j.contains("data")) config_error("config.data", "missing");
  cfg.data = parse_data(j.at("data"), base_dir, cfg.seed);

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "split", {"valid", "test"});
    cfg.valid = field_or<std::size_t>(s, "valid", "split", cfg.valid);
    cfg.test = field_or<std::size_t>(s, "test", "split", cfg.test);
  }
  if (cfg.test < 1) config_error("split.test", "must be >= 1");
  if (cfg.data.kind == DataSourceConfig::Kind::SineSynthetic && cfg.data.sine.n <= cfg.valid + cfg.test)
    config_error("split", "valid + test must be shorter than the synthetic series");
  if (cfg.data.kind == DataSourceConfig::Kind::GarchSynthetic && cfg.data.n <= cfg.valid + cfg.test)
    config_error("split", "valid + test must be shorter than the synthetic series");

  if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
    config_error("models", "at least one model is required");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < j.at("models").size(); ++i) {
    const std::string path = "models[" + std::to_string(i) + "]";
    auto spec = parse_model_spec(j.at("models")[i], cfg.seed, path);
    if (!labels.insert(spec.label).second) config_error(path, "duplicate model label '" + spec.label + "'");
    cfg.models.push_back(std::move(spec));
  }

  cfg.metrics = cfg.data.synthetic() ? kSyntheticMetrics : kRealMetrics;
  if (j.contains("metrics")) {
    cfg.metrics = field<std::vector<std::string>>(j, "metrics", "config");
    for (const auto& m : cfg.metrics)
      if (std::find(known_metrics().begin(), known_metrics().end(), m) == known_metrics().end())
        config_error("metrics", "unknown metric '" + m + "'");
  }
  cfg.scale_1e3 = field_or<bool>(j, "scale_1e3", "config", !cfg.data.synthetic());

  if (j.contains("tests")) {
    const auto& t = j.at("tests");
    check_keys(t, "tests", {"dm", "mcs", "encompassing"});
    if (t.contains("dm")) {
      const json list = t.at("dm").is_array() ? t.at("dm") : json::array({t.at("dm")});
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "tests.dm[" + std::to_string(i) + "]";
        const auto& d = list[i];
        check_keys(d, path, {"base", "losses", "small_sample_correction"});
        DmConfig dm;
        dm.base = field<std::string>(d, "base", path);
        if (!labels.count(dm.base)) config_error(path + ".base", "no model labelled '" + dm.base + "'");
        if (d.contains("losses")) {
          dm.losses.clear();
          for (const auto& l : field<std::vector<std::string>>(d, "losses", path)) dm.losses.push_back(parse_loss(l, path + ".losses"));
          if (dm.losses.empty()) config_error(path + ".losses", "must not be empty");
        }
        dm.small_sample_correction = field_or<bool>(d, "small_sample_correction", path, false);
        cfg.dm.push_back(std::move(dm));
      }
    }
    if (t.contains("mcs")) {
      const auto& m = t.at("mcs");
      check_keys(m, "tests.mcs", {"loss", "bootstrap", "block_length"});
      McsConfig mc;
      mc.loss = parse_loss(field_or<std::string>(m, "loss", "tests.mcs", "mse"), "tests.mcs.loss");
      mc.bootstrap = field_or<int>(m, "bootstrap", "tests.mcs", mc.bootstrap);
      mc.block_length = field_or<int>(m, "block_length", "tests.mcs", 0);
      if (mc.bootstrap < 1) config_error("tests.mcs.bootstrap", "must be positive");
      if (cfg.models.size() < 2) config_error("tests.mcs", "needs at least two models");
      cfg.mcs = mc;
    }
    cfg.encompassing = field_or<bool>(t, "encompassing", "tests", false);
    if (cfg.encompassing && cfg.models.size() < 2) config_error("tests.encompassing", "needs at least two models");
  }
  if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, field<std::string>(j, "output_dir", "config"));
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

std::string config_hash(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string table_csv(const Table& t) {
  std::ostringstream out;
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      const bool quote = row[i].find_first_of(",\"\n") != std::string::npos;
      if (!quote) {
        out << row[i];
        continue;
      }
      out << '"';
      for (char c : row[i]) out << (c == '"' ? "\"\"" : std::string(1, c));
      out << '"';
    }
    out << '\n';
  };
  write_row(t.header);
  for (const auto& r : t.rows) write_row(r);
  return out.str();
}

std::string emit_table(const Report& report, std::string_view id) {
  for (const auto& t : report.tables)
    if (t.id == id) return table_csv(t);
  std::string ids;
  for (const auto& t : report.tables) ids += (ids.empty() ? "" : ", ") + t.id;
  fail(ErrorKind::InvalidInput, "unknown table '" + std::string(id) + "'; available: " + ids);
}

DailyData load_data(const DataSourceConfig& src) {
  switch (src.kind) {
    case DataSourceConfig::Kind::SineSynthetic: {
      auto p = gen_sine_vol(src.sine);
      return DailyData{p.returns, p.sigma};
    }
    case DataSourceConfig::Kind::GarchSynthetic: {
      auto p = sim_garch11(src.omega, src.alpha, src.beta, src.n, src.seed);
      return DailyData{p.returns, p.sigma};
    }
    case DataSourceConfig::Kind::DailyCsv:
      return read_daily_csv(src.path);
    case DataSourceConfig::Kind::IntradayCsv: {
      auto rv = compute_realized_vol(read_intraday_csv(src.path));
      return DailyData{rv.returns, rv.rv};
    }
  }
  fail(ErrorKind::Config, "unknown data source");
}

namespace {

const std::string kNA = "NA";

std::string num(double x) { return format_double(x); }
std::string num(const std::optional<double>& x) { return x ? format_double(*x) : kNA; }

struct Segment {
  std::string name;
  std::size_t begin = 0;
  std::size_t length = 0;
};

// Forecast values for days [seg.begin, seg.begin + seg.length); forecasts
// end on the last day of the data.
Eigen::VectorXd segment_of(const VolSeries& fc, std::size_t total, const Segment& seg) {
  const std::size_t lead = total - fc.size();
  if (seg.begin < lead) fail(ErrorKind::Shape, "forecast does not cover the " + seg.name + " segment");
  return fc.values().segment(static_cast<Eigen::Index>(seg.begin - lead), static_cast<Eigen::Index>(seg.length));
}

Table metric_table(const std::string& id, const ExperimentConfig& cfg, const std::vector<MetricRow>& rows) {
  Table t{id, {"model"}, {}};
  const bool scale = cfg.scale_1e3;
  for (const auto& m : cfg.metrics) t.header.push_back(scale && (m == "mae" || m == "rmse") ? m + "_1e3" : m);
  for (const auto& r : rows) {
    std::vector<std::string> row{r.model};
    const double k = scale ? 1e3 : 1.0;
    for (const auto& m : cfg.metrics) {
      if (m == "mae") row.push_back(num(r.mae * k));
      else if (m == "rmse") row.push_back(num(r.rmse * k));
      else if (m == "hrmse") row.push_back(num(r.hrmse));
      else if (m == "qlike") row.push_back(num(r.qlike));
      else if (m == "nll") row.push_back(num(r.nll));
      else if (m == "r2") row.push_back(num(r.r2));
      else if (m == "delta_mean") row.push_back(num(r.delta_mean));
      else if (m == "delta_amplitude") row.push_back(num(r.delta_amplitude));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

json metric_json(const MetricRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"mae", r.mae}, {"rmse", r.rmse}, {"hrmse", opt(r.hrmse)}, {"qlike", opt(r.qlike)}, {"nll", opt(r.nll)},
              {"r2", opt(r.r2)}, {"delta_mean", r.delta_mean}, {"delta_amplitude", r.delta_amplitude}};
}

std::string stage_prefix(const std::string& stage) { return "stage '" + stage + "': "; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

std::string file_stem(const std::string& label) {
  std::string s = label;
  for (auto& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg, const std::optional<fs::path>& out_dir) {
  Report report;
  std::string stage = "load";
  json manifest{{"tool", "sigma-forge"},
                {"version", kVersion},
                {"seed", cfg.seed},
                {"config_hash", config_hash(cfg.source)},
                {"status", "running"}};
  std::vector<std::string> written;

  auto write_manifest = [&] {
    if (!out_dir) return;
    manifest["outputs"] = written;
    write_text(*out_dir / "manifest.json", manifest.dump(2) + "\n");
  };
  auto emit = [&](const std::string& name, const std::string& text) {
    if (!out_dir) return;
    write_text(*out_dir / name, text);
    written.push_back(name);
  };

  try {
    if (out_dir) {
      fs::create_directories(*out_dir / "models");
      fs::create_directories(*out_dir / "forecasts");
    }

    const DailyData data = load_data(cfg.data);
    const std::size_t T = data.returns.size();

    stage = "split";
    const DatasetSplit split = split_series(T, cfg.valid, cfg.test);
    const auto& r = data.returns.values();
    const auto& rv = data.rv.values();

    {
      const auto s = summary_stats(data.returns);
      Table t{"summary_stats", {"series", "count", "mean", "median", "std", "skewness", "kurtosis"}, {}};
      t.rows.push_back({"returns", std::to_string(T), num(s.mean), num(s.median), num(s.std), num(s.skewness), num(s.kurtosis)});
      report.tables.push_back(std::move(t));
    }

    stage = "fit";
    FitData fd;
    fd.returns = r.head(static_cast<Eigen::Index>(split.train.length));
    fd.rv = rv.head(static_cast<Eigen::Index>(split.train.length));
    fd.valid_returns = r.segment(static_cast<Eigen::Index>(split.valid.begin), static_cast<Eigen::Index>(split.valid.length));
    const std::size_t n_models = cfg.models.size();
    std::vector<std::optional<FittedModel>> fitted(n_models);
    std::vector<std::string> fit_errors(n_models);
    parallel_for(n_models, [&](std::size_t i) {
      try {
        fitted[i] = fit_model(cfg.models[i], fd);
      } catch (const std::exception& e) {
        fit_errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < n_models; ++i) {
      if (!fitted[i]) {
        stage = "fit:" + cfg.models[i].label;
        fail(ErrorKind::OptimizationFailed, fit_errors[i]);
      }
      report.models.push_back(std::move(*fitted[i]));
    }
    for (const auto& m : report.models) {
      const std::string name = "models/" + file_stem(m.label) + ".json";
      emit(name, to_json(m).dump(2) + "\n");
    }

    stage = "forecast";
    for (const auto& m : report.models) {
      report.forecasts.push_back(forecast_model(m, data));
      emit("forecasts/" + file_stem(m.label) + ".csv", forecast_csv_text(report.forecasts.back()));
    }

    stage = "evaluate";
    const Segment in_seg = split.valid.length > 0 ? Segment{"valid", split.valid.begin, split.valid.length}
                                                  : Segment{"train", 1, split.train.length - 1};
    const Segment out_seg{"test", split.test.begin, split.test.length};
    json metrics_json = json::object();
    for (const auto& seg : {in_seg, out_seg}) {
      const Eigen::VectorXd truth = rv.segment(static_cast<Eigen::Index>(seg.begin), static_cast<Eigen::Index>(seg.length));
      const Eigen::VectorXd rets = r.segment(static_cast<Eigen::Index>(seg.begin), static_cast<Eigen::Index>(seg.length));
      std::vector<MetricRow> rows;
      for (std::size_t i = 0; i < report.models.size(); ++i) {
        rows.push_back(evaluate_forecast(report.models[i].label, truth, segment_of(report.forecasts[i], T, seg), rets));
        metrics_json[seg.name][report.models[i].label] = metric_json(rows.back());
      }
      const bool in = seg.name != "test";
      report.tables.push_back(metric_table(in ? "metrics_in_sample" : "metrics_out_of_sample", cfg, rows));
    }

    stage = "tests";
    const Eigen::VectorXd test_truth =
        rv.segment(static_cast<Eigen::Index>(out_seg.begin), static_cast<Eigen::Index>(out_seg.length));
    std::vector<Eigen::VectorXd> test_fc;
    for (const auto& fc : report.forecasts) test_fc.push_back(segment_of(fc, T, out_seg));
    auto index_of = [&](const std::string& label) {
      for (std::size_t i = 0; i < report.models.size(); ++i)
        if (report.models[i].label == label) return i;
      fail(ErrorKind::Config, "no model labelled '" + label + "'");
    };
    const double loss_scale = cfg.scale_1e3 ? 1e3 : 1.0;
    const std::string loss_suffix = cfg.scale_1e3 ? "_loss_1e3" : "_loss";
    json tests_json = json::object();

    for (const auto& dm : cfg.dm) {
      const std::size_t b = index_of(dm.base);
      Table t{"dm_" + dm.base, {"model"}, {}};
      for (auto k : dm.losses) {
        t.header.push_back(loss_name(k) + loss_suffix);
        t.header.push_back(loss_name(k) + "_p_value");
      }
      for (std::size_t i = 0; i < report.models.size(); ++i) {
        std::vector<std::string> row{report.models[i].label};
        for (auto k : dm.losses) {
          const Eigen::VectorXd li = forecast_losses(test_truth, test_fc[i], k);
          row.push_back(num(li.mean() * loss_scale));
          if (i == b) {
            row.push_back(kNA);
            continue;
          }
          const auto res = dm_test(li, forecast_losses(test_truth, test_fc[b], k),
                                   DmOptions{dm.small_sample_correction});
          row.push_back(num(res.p_value));
          tests_json["dm"][dm.base][report.models[i].label][loss_name(k)] =
              json{{"stat", res.stat}, {"p_value", res.p_value}, {"mean_diff", res.mean_diff}};
        }
        t.rows.push_back(std::move(row));
      }
      report.tables.push_back(std::move(t));
    }

    if (cfg.mcs) {
      LossMatrix lm;
      lm.losses.resize(static_cast<Eigen::Index>(report.models.size()), static_cast<Eigen::Index>(out_seg.length));
      for (std::size_t i = 0; i < report.models.size(); ++i) {
        lm.models.push_back(report.models[i].label);
        lm.losses.row(static_cast<Eigen::Index>(i)) = forecast_losses(test_truth, test_fc[i], cfg.mcs->loss).transpose();
      }
      McsOptions opts;
      opts.bootstrap = cfg.mcs->bootstrap;
      opts.block_length = cfg.mcs->block_length;
      opts.seed = cfg.seed;
      const auto res = mcs(lm, opts);
      Table t{"mcs", {"model", loss_name(cfg.mcs->loss) + loss_suffix, "p_value", "mcs_90_75"}, {}};
      for (std::size_t i = 0; i < lm.models.size(); ++i) {
        const std::string stars = res.in_75[i] ? "**" : (res.in_90[i] ? "*" : "");
        t.rows.push_back({lm.models[i], num(lm.losses.row(static_cast<Eigen::Index>(i)).mean() * loss_scale),
                          num(res.p_values[i]), stars});
        tests_json["mcs"][lm.models[i]] = json{{"p_value", res.p_values[i]}, {"in_90", static_cast<bool>(res.in_90[i])},
                                                 {"in_75", static_cast<bool>(res.in_75[i])}};
      }
      std::vector<std::string> order;
      for (auto k : res.elimination) order.push_back(lm.models[k]);
      tests_json["mcs_elimination_order"] = order;
      report.tables.push_back(std::move(t));
    }

    if (cfg.encompassing) {
      Table a1{"encompassing_a1", {""}, {}}, a2{"encompassing_a2", {""}, {}};
      for (const auto& m : report.models) {
        a1.header.push_back(m.label);
        a2.header.push_back(m.label);
      }
      for (std::size_t i = 0; i < report.models.size(); ++i) {
        std::vector<std::string> row1{report.models[i].label}, row2{report.models[i].label};
        for (std::size_t j = 0; j < report.models.size(); ++j) {
          if (i == j) {
            row1.push_back("-");
            row2.push_back("-");
            continue;
          }
          try {
            const auto e = encompassing_regression(test_truth, test_fc[i], test_fc[j]);
            row1.push_back(num(e.coef_i) + e.stars_i);
            row2.push_back(num(e.coef_j) + e.stars_j);
          } catch (const Error& err) {
            if (err.kind() != ErrorKind::SingularDesign) throw;
            row1.push_back(kNA);
            row2.push_back(kNA);
          }
        }
        a1.rows.push_back(std::move(row1));
        a2.rows.push_back(std::move(row2));
      }
      report.tables.push_back(std::move(a1));
      report.tables.push_back(std::move(a2));
      tests_json["encompassing_star_convention"] =
          "*** p<=0.01, ** p<=0.05, * p<=0.10; the published tables state the reverse order, which is not used";
      tests_json["encompassing_hac_lag"] = kEncompassingHacLag;
    }

    stage = "write";
    json models_json = json::object();
    for (const auto& m : report.models) {
      json entry{{"family", to_json(m).at("family")}};
      if (const auto* c = std::get_if<SigmaCellModel>(&m.state)) {
        entry["training"] = to_json(m).at("training");
        entry["seed"] = c->config.seed;
      }
      models_json[m.label] = std::move(entry);
    }
    report.summary = json{{"version", kVersion},
                          {"seed", cfg.seed},
                          {"config_hash", config_hash(cfg.source)},
                          {"data", {{"length", T}, {"synthetic", cfg.data.synthetic()}}},
                          {"split",
                           {{"train", split.train.length}, {"valid", split.valid.length}, {"test", split.test.length}}},
                          {"in_sample_segment", in_seg.name},
                          {"scale_1e3", cfg.scale_1e3},
                          {"models", models_json},
                          {"metrics", metrics_json},
                          {"tests", tests_json}};
    for (const auto& t : report.tables) emit(t.id + ".csv", table_csv(t));
    emit("summary.json", report.summary.dump(2) + "\n");
    manifest["status"] = "ok";
    write_manifest();
  } catch (const Error& e) {
    manifest["status"] = "failed";
    manifest["stage"] = stage;
    manifest["error"] = e.what();
    try {
      write_manifest();
    } catch (const Error&) {
    }
    throw Error(e.kind(), stage_prefix(stage) + e.what());
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["stage"] = stage;
    manifest["error"] = e.what();
    try {
      write_manifest();
    } catch (const Error&) {
    }
    throw Error(ErrorKind::Io, stage_prefix(stage) + e.what());
  }
  return report;
}

}  // namespace sigmaforge
