#include "sigmaforge/error.hpp"
#include "sigmaforge/experiment.hpp"
#include "sigmaforge/models.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sigmaforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sigmaforge_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json small_config() {
  return json::parse(R"({
    "data": {"synthetic": {"process": "sine", "n": 400, "amplitude": 0.7, "half_period": 50}},
    "split": {"valid": 0, "test": 200},
    "models": ["garch11", {"name": "sigma-cell-rltv", "epochs": 20, "hidden": 3, "residual_hidden": 3}, "gjr-garch"],
    "tests": {"dm": {"base": "garch11"}, "mcs": {"bootstrap": 200}, "encompassing": true},
    "seed": 7
  })");
}

ErrorKind kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_experiment_config(small_config());
  CHECK(cfg.models.size() == 3);
  CHECK(cfg.models[1].label == "sigma-cell-rltv");
  CHECK(cfg.models[1].cell.seed == 7);
  CHECK(cfg.models[1].cell.epochs == 20);
  CHECK(cfg.valid == 0);
  CHECK(cfg.metrics == std::vector<std::string>{"rmse", "mae", "nll", "delta_mean", "delta_amplitude"});
  CHECK(cfg.dm.size() == 1);
  CHECK(cfg.mcs->bootstrap == 200);
  CHECK(cfg.encompassing);
  CHECK_FALSE(cfg.scale_1e3);
}

TEST_CASE("config errors name the field path") {
  std::string msg;
  auto j = small_config();
  j["models"][1]["epochz"] = 3;
  CHECK(kind_of([&] { parse_experiment_config(j); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("models[1].epochz") != std::string::npos);

  j = small_config();
  j["split"]["test"] = "many";
  CHECK(kind_of([&] { parse_experiment_config(j); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("split.test") != std::string::npos);

  j = small_config();
  j["tests"]["dm"]["base"] = "nope";
  CHECK(kind_of([&] { parse_experiment_config(j); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("tests.dm[0].base") != std::string::npos);

  j = small_config();
  j["models"] = json::array();
  CHECK(kind_of([&] { parse_experiment_config(j); }) == ErrorKind::Config);

  j = small_config();
  j["models"].push_back("garch11");
  CHECK(kind_of([&] { parse_experiment_config(j); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("duplicate") != std::string::npos);

  j = small_config();
  j["data"] = json{{"daily_csv", "/nonexistent/prices.csv"}};
  CHECK(kind_of([&] { parse_experiment_config(j); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("/nonexistent/prices.csv") != std::string::npos);

  j = small_config();
  j["split"]["test"] = 400;
  CHECK(kind_of([&] { parse_experiment_config(j); }) == ErrorKind::Config);

  j = small_config();
  j["metrics"] = {"rmse", "sharpe"};
  CHECK(kind_of([&] { parse_experiment_config(j); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("sharpe") != std::string::npos);
}

TEST_CASE("config hash tracks every field") {
  const auto base = small_config();
  const std::string h = config_hash(base);
  CHECK(h.size() == 16);
  CHECK(config_hash(json::parse(base.dump())) == h);

  auto j = base;
  j["seed"] = 8;
  CHECK(config_hash(j) != h);
  j = base;
  j["data"]["synthetic"]["amplitude"] = 0.6;
  CHECK(config_hash(j) != h);
  j = base;
  j["models"][1]["epochs"] = 21;
  CHECK(config_hash(j) != h);

  // Key order does not matter.
  const auto reordered = json::parse(R"({"b": 1, "a": 2})");
  CHECK(config_hash(reordered) == config_hash(json::parse(R"({"a": 2, "b": 1})")));
}

TEST_CASE("model json round trip is exact") {
  // A sampled sine makes the HAR design rank 3, so use a GARCH path.
  const auto path = sim_garch11(0.1, 0.1, 0.8, 300, 3);
  FitData fd;
  fd.returns = path.returns.values();
  fd.rv = path.sigma.values();
  const DailyData data{path.returns, path.sigma};

  for (const std::string name : {"sigma-cell-rltv", "sigma-cell-ntv", "gjr-garch", "egarch", "har", "logsv"}) {
    CAPTURE(name);
    json spec_json = name;
    if (name.starts_with("sigma-cell")) spec_json = json{{"name", name}, {"epochs", 10}, {"hidden", 3}};
    const auto model = fit_model(parse_model_spec(spec_json, 5), fd);
    const auto text = to_json(model).dump();
    const auto back = model_from_json(json::parse(text));
    CHECK(to_json(back).dump() == text);
    CHECK(forecast_model(back, data).values() == forecast_model(model, data).values());
  }

  const auto dir = scratch_dir("roundtrip");
  const auto model = fit_model(parse_model_spec("garch11", 0), fd);
  save_model(model, dir / "m.json");
  CHECK(to_json(load_model(dir / "m.json")) == to_json(model));
  CHECK_THROWS_AS(load_model(dir / "missing.json"), Error);
  CHECK_THROWS_AS(model_from_json(json{{"format", "other"}}), Error);
}

TEST_CASE("experiment outputs and determinism") {
  const auto cfg = parse_experiment_config(small_config());
  const auto d1 = scratch_dir("exp1");
  const auto d2 = scratch_dir("exp2");
  const auto report = run_experiment(cfg, d1);
  run_experiment(cfg, d2);

  for (const auto& name : {"metrics_out_of_sample.csv", "metrics_in_sample.csv", "dm_garch11.csv", "mcs.csv",
                           "encompassing_a1.csv", "summary.json", "manifest.json", "models/garch11.json",
                           "forecasts/sigma-cell-rltv.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(d1 / name));
    CHECK(slurp(d1 / name) == slurp(d2 / name));
  }

  const std::string metrics = emit_table(report, "metrics_out_of_sample");
  CHECK(metrics == slurp(d1 / "metrics_out_of_sample.csv"));
  CHECK(metrics == emit_table(report, "metrics_out_of_sample"));
  CHECK(metrics.rfind("model,rmse,mae,nll,delta_mean,delta_amplitude\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);
  CHECK(emit_table(report, "mcs").find("mcs_90_75") != std::string::npos);

  std::string msg;
  CHECK(kind_of([&] { emit_table(report, "table_99"); }, &msg) == ErrorKind::InvalidInput);
  CHECK(msg.find("metrics_out_of_sample") != std::string::npos);
  CHECK(msg.find("mcs") != std::string::npos);

  const auto manifest = json::parse(slurp(d1 / "manifest.json"));
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("config_hash") == config_hash(small_config()));
  CHECK(manifest.at("seed") == 7);
}

TEST_CASE("failed stage is recorded in the manifest") {
  auto j = small_config();
  const auto dir = scratch_dir("fail");
  const fs::path csv = dir / "daily.csv";
  {
    std::ofstream out(csv);
    out << "date,return,rv\n";
    // Too short for a GARCH fit, so the fit stage fails.
    for (int i = 0; i < 40; ++i) out << "d" << 100 + i << "," << 0.01 * ((i * 7) % 5 - 2) << ",0.01\n";
  }
  j["data"] = json{{"daily_csv", csv.string()}};
  j["split"] = json{{"valid", 0}, {"test", 10}};
  j["models"] = {"garch11"};
  j.erase("tests");
  const auto cfg = parse_experiment_config(j);
  std::string msg;
  kind_of([&] { run_experiment(cfg, dir / "out"); }, &msg);
  CHECK(msg.find("stage 'fit") != std::string::npos);
  const auto manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest.at("status") == "failed");
  CHECK(manifest.at("stage").get<std::string>().rfind("fit", 0) == 0);
}
