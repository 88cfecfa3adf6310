// sigma-forge command-line front end.

#include "sigmaforge/error.hpp"
#include "sigmaforge/experiment.hpp"
#include "sigmaforge/metrics.hpp"
#include "sigmaforge/models.hpp"
#include "sigmaforge/stats_tests.hpp"
#include "sigmaforge/synth.hpp"
#include "sigmaforge/timeseries.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace sigmaforge;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << text;
}

// Forecasts keyed by file stem, each restricted to the days it shares with
// every other forecast and the truth.
struct AlignedForecasts {
  std::vector<std::string> names;
  DayIndex days;
  Eigen::VectorXd truth;
  Eigen::VectorXd returns;
  std::vector<Eigen::VectorXd> forecasts;
};

AlignedForecasts align(const std::string& truth_path, const std::vector<std::string>& forecast_paths) {
  if (forecast_paths.empty()) fail(ErrorKind::InvalidInput, "no forecast files given");
  const DailyData truth = read_daily_csv(truth_path);
  std::vector<VolSeries> fcs;
  AlignedForecasts out;
  for (const auto& p : forecast_paths) {
    fcs.push_back(read_forecast_csv(p));
    out.names.push_back(fs::path(p).stem().string());
  }
  std::map<std::string, std::size_t> truth_pos;
  for (std::size_t i = 0; i < truth.rv.size(); ++i) truth_pos[truth.rv.index()[i]] = i;
  std::vector<std::map<std::string, std::size_t>> fc_pos(fcs.size());
  for (std::size_t k = 0; k < fcs.size(); ++k)
    for (std::size_t i = 0; i < fcs[k].size(); ++i) fc_pos[k][fcs[k].index()[i]] = i;

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < truth.rv.size(); ++i) {
    const auto& d = truth.rv.index()[i];
    bool everywhere = true;
    for (const auto& m : fc_pos) everywhere = everywhere && m.count(d);
    if (everywhere) rows.push_back(i);
  }
  if (rows.empty()) fail(ErrorKind::Shape, "forecasts share no dates with the truth file");
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.truth.resize(n);
  out.returns.resize(n);
  out.forecasts.assign(fcs.size(), Eigen::VectorXd(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = rows[static_cast<std::size_t>(r)];
    const auto& d = truth.rv.index()[i];
    out.days.push_back(d);
    out.truth[r] = truth.rv[i];
    out.returns[r] = truth.returns[i];
    for (std::size_t k = 0; k < fcs.size(); ++k) out.forecasts[k][r] = fcs[k][fc_pos[k].at(d)];
  }
  return out;
}

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sigma-forge: volatility models, forecasts and forecast comparison"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // synth-gen
  auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic daily CSV (date,return,rv)");
  std::string process = "sine", synth_out;
  SineVolConfig sine;
  double omega = 0.1, alpha = 0.1, beta = 0.8;
  HestonParams heston{0.0, 0.02, 0.0001, 0.002, 0.0001, 100.0, -0.5};
  std::size_t steps_per_day = 78;
  synth->add_option("--process", process, "sine | garch11 | heston")->check(CLI::IsMember({"sine", "garch11", "heston"}));
  synth->add_option("--n", sine.n, "Number of days");
  synth->add_option("--amplitude", sine.amplitude, "Sine amplitude A");
  synth->add_option("--half-period", sine.half_period, "Sine half-period B");
  synth->add_option("--seed", sine.seed, "RNG seed");
  synth->add_option("--omega", omega);
  synth->add_option("--alpha", alpha);
  synth->add_option("--beta", beta);
  synth->add_option("--kappa", heston.kappa, "Heston mean reversion per step");
  synth->add_option("--theta", heston.theta, "Heston long-run variance");
  synth->add_option("--vol-of-vol", heston.vol_of_vol);
  synth->add_option("--v0", heston.v0);
  synth->add_option("--rho", heston.rho);
  synth->add_option("--steps-per-day", steps_per_day);
  synth->add_option("--out", synth_out, "Output CSV, - for stdout")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build daily returns and realized volatility from intraday prices");
  std::string ingest_in, ingest_out;
  ingest->add_option("--intraday", ingest_in, "CSV with header timestamp,price")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Daily CSV output, - for stdout")->required();

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit one model on a daily CSV");
  std::string fit_model_name, fit_data, fit_out, fit_settings;
  std::uint64_t fit_seed = 0;
  std::size_t fit_valid = 0, fit_test = 0;
  fitc->add_option("--model", fit_model_name, "Model name, e.g. garch11 or sigma-cell-rltv")->required();
  fitc->add_option("--data", fit_data, "Daily CSV")->required()->check(CLI::ExistingFile);
  fitc->add_option("--seed", fit_seed, "Seed for sigma-cell training");
  fitc->add_option("--settings", fit_settings, "JSON object of sigma-cell settings, e.g. {\"epochs\":200}");
  fitc->add_option("--valid", fit_valid, "Days after the training sample used for model selection");
  fitc->add_option("--test", fit_test, "Trailing days excluded from fitting");
  fitc->add_option("--out", fit_out, "Model JSON")->required();

  // forecast
  auto* fc = app.add_subcommand("forecast", "One-step-ahead volatility forecasts from a fitted model");
  std::string fc_model, fc_data, fc_out;
  fc->add_option("--model", fc_model, "Model JSON")->required()->check(CLI::ExistingFile);
  fc->add_option("--data", fc_data, "Daily CSV starting where the training sample started")->required()->check(CLI::ExistingFile);
  fc->add_option("--out", fc_out, "Forecast CSV (date,sigma_hat), - for stdout")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Metric table for forecast files against the rv column");
  std::string ev_truth, ev_forecasts, ev_out, ev_metrics;
  bool ev_scale = false;
  ev->add_option("--truth", ev_truth, "Daily CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--forecasts", ev_forecasts, "Comma-separated forecast CSVs")->required();
  ev->add_option("--metrics", ev_metrics, "Comma-separated metric columns");
  ev->add_flag("--scale-1e3", ev_scale, "Report MAE and RMSE x 1e3");
  ev->add_option("--out", ev_out, "Output CSV, - for stdout")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "Diebold-Mariano, model confidence set or encompassing tests");
  std::string cmp_test, cmp_base, cmp_losses = "mse,mad", cmp_truth, cmp_forecasts, cmp_out = "-";
  int cmp_bootstrap = 10000;
  std::uint64_t cmp_seed = 0;
  cmp->add_option("--test", cmp_test, "dm | mcs | encompass")->required()->check(CLI::IsMember({"dm", "mcs", "encompass"}));
  cmp->add_option("--base", cmp_base, "Base model (file stem) for dm");
  cmp->add_option("--losses", cmp_losses, "mse,mad");
  cmp->add_option("--truth", cmp_truth, "Daily CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--forecasts", cmp_forecasts, "Comma-separated forecast CSVs")->required();
  cmp->add_option("--bootstrap", cmp_bootstrap, "MCS bootstrap replications");
  cmp->add_option("--seed", cmp_seed, "MCS seed");
  cmp->add_option("--out", cmp_out, "Output CSV, - for stdout");

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a full experiment from a JSON config");
  std::string ex_config, ex_out;
  ex->add_option("--config", ex_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", ex_out, "Output directory (defaults to the config's output_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      DailyData d{ReturnSeries(Eigen::VectorXd::Zero(1)), VolSeries(Eigen::VectorXd::Zero(1))};
      if (process == "sine") {
        auto p = gen_sine_vol(sine);
        d = DailyData{p.returns, p.sigma};
      } else if (process == "garch11") {
        auto p = sim_garch11(omega, alpha, beta, sine.n, sine.seed);
        d = DailyData{p.returns, p.sigma};
      } else {
        auto p = sim_heston(heston, sine.n, steps_per_day, sine.seed);
        Eigen::VectorXd closes(static_cast<Eigen::Index>(sine.n) + 1);
        for (Eigen::Index k = 0; k < closes.size(); ++k) closes[k] = p.prices[k * static_cast<Eigen::Index>(steps_per_day)];
        d = DailyData{compute_log_returns(closes), p.daily_vol};
      }
      write_text(synth_out, daily_csv_text(d.returns, d.rv));
    } else if (*ingest) {
      auto rv = compute_realized_vol(read_intraday_csv(ingest_in));
      for (const auto& day : rv.dropped_days) std::cerr << "warning: dropped " << day << " (fewer than two prices)\n";
      write_text(ingest_out, daily_csv_text(rv.returns, rv.rv));
    } else if (*fitc) {
      nlohmann::json spec_json = fit_model_name;
      if (!fit_settings.empty()) {
        spec_json = nlohmann::json::parse(fit_settings);
        spec_json["name"] = fit_model_name;
      }
      const ModelSpec spec = parse_model_spec(spec_json, fit_seed, "--model");
      const DailyData data = read_daily_csv(fit_data);
      const auto split = split_series(data.returns.size(), fit_valid, fit_test);
      FitData fd;
      fd.returns = data.returns.values().head(static_cast<Eigen::Index>(split.train.length));
      fd.rv = data.rv.values().head(static_cast<Eigen::Index>(split.train.length));
      fd.valid_returns = data.returns.values().segment(static_cast<Eigen::Index>(split.valid.begin),
                                                       static_cast<Eigen::Index>(split.valid.length));
      save_model(fit_model(spec, fd), fit_out);
    } else if (*fc) {
      write_text(fc_out, forecast_csv_text(forecast_model(load_model(fc_model), read_daily_csv(fc_data))));
    } else if (*ev) {
      const auto a = align(ev_truth, split_list(ev_forecasts));
      ExperimentConfig shape;
      shape.metrics = ev_metrics.empty() ? std::vector<std::string>{"mae", "rmse", "hrmse", "qlike", "nll", "r2"}
                                         : split_list(ev_metrics);
      std::ostringstream out;
      out << "model";
      for (const auto& m : shape.metrics) out << ',' << (ev_scale && (m == "mae" || m == "rmse") ? m + "_1e3" : m);
      out << '\n';
      for (std::size_t k = 0; k < a.names.size(); ++k) {
        const auto row = evaluate_forecast(a.names[k], a.truth, a.forecasts[k], a.returns);
        const double s = ev_scale ? 1e3 : 1.0;
        out << row.model;
        for (const auto& m : shape.metrics) {
          out << ',';
          if (m == "mae") out << format_double(row.mae * s);
          else if (m == "rmse") out << format_double(row.rmse * s);
          else if (m == "hrmse") out << opt_num(row.hrmse);
          else if (m == "qlike") out << opt_num(row.qlike);
          else if (m == "nll") out << opt_num(row.nll);
          else if (m == "r2") out << opt_num(row.r2);
          else if (m == "delta_mean") out << format_double(row.delta_mean);
          else if (m == "delta_amplitude") out << format_double(row.delta_amplitude);
          else fail(ErrorKind::InvalidInput, "unknown metric '" + m + "'");
        }
        out << '\n';
      }
      write_text(ev_out, out.str());
    } else if (*cmp) {
      const auto a = align(cmp_truth, split_list(cmp_forecasts));
      std::ostringstream out;
      if (cmp_test == "dm") {
        const auto it = std::find(a.names.begin(), a.names.end(), cmp_base);
        if (it == a.names.end()) fail(ErrorKind::InvalidInput, "--base must name one of the forecast files");
        const auto b = static_cast<std::size_t>(it - a.names.begin());
        std::vector<LossKind> losses;
        for (const auto& l : split_list(cmp_losses)) {
          if (l == "mse") losses.push_back(LossKind::Mse);
          else if (l == "mad") losses.push_back(LossKind::Mad);
          else fail(ErrorKind::InvalidInput, "unknown loss '" + l + "'");
        }
        out << "model";
        for (auto k : losses) {
          const std::string n = k == LossKind::Mse ? "mse" : "mad";
          out << ',' << n << "_loss," << n << "_stat," << n << "_p_value";
        }
        out << '\n';
        for (std::size_t i = 0; i < a.names.size(); ++i) {
          out << a.names[i];
          for (auto k : losses) {
            const Eigen::VectorXd li = forecast_losses(a.truth, a.forecasts[i], k);
            out << ',' << format_double(li.mean());
            if (i == b) {
              out << ",NA,NA";
              continue;
            }
            const auto r = dm_test(li, forecast_losses(a.truth, a.forecasts[b], k));
            out << ',' << format_double(r.stat) << ',' << format_double(r.p_value);
          }
          out << '\n';
        }
      } else if (cmp_test == "mcs") {
        LossMatrix lm;
        lm.models = a.names;
        lm.losses.resize(static_cast<Eigen::Index>(a.names.size()), a.truth.size());
        const LossKind k = split_list(cmp_losses).front() == "mad" ? LossKind::Mad : LossKind::Mse;
        for (std::size_t i = 0; i < a.names.size(); ++i)
          lm.losses.row(static_cast<Eigen::Index>(i)) = forecast_losses(a.truth, a.forecasts[i], k).transpose();
        McsOptions opts;
        opts.bootstrap = cmp_bootstrap;
        opts.seed = cmp_seed;
        const auto r = mcs(lm, opts);
        out << "model,loss,p_value,mcs_90_75\n";
        for (std::size_t i = 0; i < lm.models.size(); ++i)
          out << lm.models[i] << ',' << format_double(lm.losses.row(static_cast<Eigen::Index>(i)).mean()) << ','
              << format_double(r.p_values[i]) << ',' << (r.in_75[i] ? "**" : (r.in_90[i] ? "*" : "")) << '\n';
      } else {
        out << "model_i,model_j,a0,a1,a2,p1,p2,stars1,stars2,r2\n";
        for (std::size_t i = 0; i < a.names.size(); ++i) {
          for (std::size_t j = 0; j < a.names.size(); ++j) {
            if (i == j) continue;
            const auto e = encompassing_regression(a.truth, a.forecasts[i], a.forecasts[j]);
            out << a.names[i] << ',' << a.names[j] << ',' << format_double(e.intercept) << ',' << format_double(e.coef_i)
                << ',' << format_double(e.coef_j) << ',' << format_double(e.p_i) << ',' << format_double(e.p_j) << ','
                << e.stars_i << ',' << e.stars_j << ',' << format_double(e.r2) << '\n';
          }
        }
      }
      write_text(cmp_out, out.str());
    } else if (*ex) {
      const auto cfg = load_experiment_config(ex_config);
      std::optional<fs::path> out = ex_out.empty() ? cfg.output_dir : std::optional<fs::path>(ex_out);
      if (!out) fail(ErrorKind::Config, "no output directory: pass --out or set output_dir");
      run_experiment(cfg, out);
      std::cerr << "wrote " << out->string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
