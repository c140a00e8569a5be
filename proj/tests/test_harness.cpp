#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dp/harness.hpp"
#include "dp/verify.hpp"

using namespace dp;
using namespace dp::harness;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

json minimal_config_json() {
  return json{
      {"schema_version", 1},
      {"problem",
       {{"p", 8},
        {"k", 3},
        {"n", 60},
        {"loss", "logistic"},
        {"constraint", {{"kind", "unconstrained"}}}}},
      {"optimizer", {{"algorithm", "noisy_adagrad"}, {"eta", 0.3}, {"T", 12}}},
      {"privacy", nullptr},
      {"oracle", {{"kind", "exact"}, {"k", 3}}},
      {"schedule", {{"sigma_b", 0.05}, {"sigma_B", 0.0}}},
      {"seeds", {1, 2}},
      {"output_dir", (fs::temp_directory_path() / "dp_precond_harness").string()}};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("config parsing reports missing fields by path") {
  json j = minimal_config_json();
  j["problem"].erase("n");
  bool threw = false;
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("problem.n") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("config validation rules") {
  // derived horizon requires privacy
  {
    json j = minimal_config_json();
    j["optimizer"]["T"] = "derived";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  // private mode forbids envelope-proportional noise
  {
    json j = minimal_config_json();
    j["privacy"] = {{"epsilon", 1.0}, {"delta", 1e-5}};
    j["schedule"]["envelope_mode"] = true;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  // dp_gd cannot be ball-constrained
  {
    json j = minimal_config_json();
    j["optimizer"]["algorithm"] = "dp_gd";
    j["optimizer"]["sigma"] = 0.1;
    j["problem"]["constraint"] = {{"kind", "ball"}, {"radius", 1.0}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  // bad horizon type
  {
    json j = minimal_config_json();
    j["optimizer"]["T"] = "sometime";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
}

TEST_CASE("derived horizon uses the private iteration count") {
  json j = minimal_config_json();
  j["problem"]["n"] = 100;
  j["optimizer"]["T"] = "derived";
  j["privacy"] = {{"epsilon", 1.0}, {"delta", 1e-5}};
  j["schedule"] = {{"alpha", 0.5}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  CHECK(cfg.resolve_horizon() == 100);

  const TrialResult trial = run_trial(cfg, 1);
  CHECK(trial.horizon == 100);
  CHECK(trial.metrics.T == 100);
  CHECK(trial.has_ledger);
  CHECK(trial.ledger.size() == 200);  // gradient + preconditioner per step
}

TEST_CASE("run_experiment reruns are byte-identical") {
  json j = minimal_config_json();
  const fs::path base = fs::temp_directory_path() / "dp_precond_determinism";
  fs::remove_all(base);
  j["output_dir"] = base.string();

  const ExperimentOutput first = run_experiment(ExperimentConfig::from_json(j), 1);
  std::vector<std::string> contents;
  for (const std::string& path : first.written_files) contents.push_back(slurp(path));

  const ExperimentOutput second = run_experiment(ExperimentConfig::from_json(j), 1);
  REQUIRE(second.written_files == first.written_files);
  for (std::size_t i = 0; i < first.written_files.size(); ++i)
    CHECK(slurp(second.written_files[i]) == contents[i]);

  // config echo, metrics, steps for each of the two seeds; non-private: no ledger
  CHECK(first.written_files.size() == 6);
  fs::remove_all(base);
}

TEST_CASE("private harness runs emit a compliant ledger file") {
  json j = minimal_config_json();
  j["privacy"] = {{"epsilon", 1.0}, {"delta", 1e-5}};
  j["optimizer"]["T"] = 10;
  j["seeds"] = {7};
  const fs::path base = fs::temp_directory_path() / "dp_precond_ledger";
  fs::remove_all(base);
  j["output_dir"] = base.string();

  const ExperimentOutput out = run_experiment(ExperimentConfig::from_json(j), 1);
  const fs::path ledger_path = base / "seed_7" / "ledger.jsonl";
  REQUIRE(fs::exists(ledger_path));
  const privacy::BudgetLedger ledger = privacy::BudgetLedger::from_jsonl(slurp(ledger_path.string()));
  CHECK(ledger.size() == 20);
  CHECK_NOTHROW(ledger.assert_compliant());
  fs::remove_all(base);
}

TEST_CASE("sweep requires two values and ten seeds, then aggregates medians") {
  json j = minimal_config_json();
  j["seeds"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  j["optimizer"]["T"] = 8;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);

  CHECK_THROWS_AS(run_sweep(cfg, SweepAxis::Dimension, {10.0}, 1), ConfigError);
  {
    json j2 = minimal_config_json();
    const ExperimentConfig two_seeds = ExperimentConfig::from_json(j2);
    CHECK_THROWS_AS(run_sweep(two_seeds, SweepAxis::Dimension, {8.0, 16.0}, 1), ConfigError);
  }

  const SweepResult result = run_sweep(cfg, SweepAxis::Dimension, {8.0, 16.0}, 1);
  REQUIRE(result.points.size() == 2);
  CHECK(result.points[0].axis_value == 8.0);
  CHECK(result.points[1].axis_value == 16.0);
  for (const SweepPoint& pt : result.points) {
    CHECK(pt.seed_count == 10);
    CHECK(pt.q25_excess <= pt.median_excess);
    CHECK(pt.median_excess <= pt.q75_excess);
  }
}

TEST_CASE("gamma sweep values map to corruption angles") {
  json j = minimal_config_json();
  j["seeds"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  j["optimizer"]["T"] = 8;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  CHECK_THROWS_AS(run_sweep(cfg, SweepAxis::Gamma, {0.0, 1.5}, 1), ConfigError);
}

TEST_CASE("public-data oracle runs through the harness") {
  json j = minimal_config_json();
  j["oracle"] = {{"kind", "public"}, {"k", 3}, {"public_m", 20}, {"refresh", "initial"}};
  j["public_n"] = 25;
  j["optimizer"]["T"] = 6;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const TrialResult trial = run_trial(cfg, 3);
  CHECK(trial.metrics.T == 6);
  CHECK(trial.metrics.steps.back().gamma_t <= 0.8);  // oracle tracks the true subspace
}

TEST_CASE("config echo round-trips through json") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(minimal_config_json());
  const ExperimentConfig reparsed = ExperimentConfig::from_json(cfg.to_json());
  CHECK(reparsed.to_json() == cfg.to_json());
}

TEST_CASE("jobs resolution: env var overrides the flag") {
  unsetenv("DP_PRECOND_JOBS");
  CHECK(resolve_jobs(3) == 3);
  setenv("DP_PRECOND_JOBS", "2", 1);
  CHECK(resolve_jobs(8) == 2);
  setenv("DP_PRECOND_JOBS", "zebra", 1);
  CHECK_THROWS_AS(resolve_jobs(8), ConfigError);
  unsetenv("DP_PRECOND_JOBS");
}

TEST_CASE("verify rejects a zero trial count and filters preconditions") {
  CHECK_THROWS_AS(verify::verify_all(1, 0), InvalidParams);
  // the h-inverse generator deliberately includes hypothesis-violating draws;
  // they must surface as skips, never failures
  const verify::SuiteResult r = verify::verify_h_inverse(5, 300);
  CHECK(r.skipped > 0);
  CHECK(r.failures == 0);
  CHECK(r.checked + r.skipped == 300);
}

TEST_CASE("sweep outputs land in the configured directory") {
  json j = minimal_config_json();
  j["seeds"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  j["optimizer"]["T"] = 6;
  const fs::path base = fs::temp_directory_path() / "dp_precond_sweepfiles";
  fs::remove_all(base);
  j["output_dir"] = base.string();
  run_sweep_to_files(ExperimentConfig::from_json(j), SweepAxis::Dimension, {8.0, 12.0}, 1);
  CHECK(fs::exists(base / "sweep.csv"));
  CHECK(fs::exists(base / "sweep.json"));
  fs::remove_all(base);
}

TEST_CASE("horizon sweeps attach a rate report when four points are present") {
  json j = minimal_config_json();
  j["seeds"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const fs::path base = fs::temp_directory_path() / "dp_precond_ratefit";
  fs::remove_all(base);
  j["output_dir"] = base.string();
  run_sweep_to_files(ExperimentConfig::from_json(j), SweepAxis::Horizon,
                     {10.0, 20.0, 40.0, 80.0}, 1);
  std::ifstream in((base / "sweep.json").string());
  json out;
  in >> out;
  REQUIRE(out.contains("rate_fit"));
  CHECK(out["rate_fit"].contains("regret_slope"));
  fs::remove_all(base);
}

TEST_CASE("sweep aggregation is independent of the worker count") {
  json j = minimal_config_json();
  j["seeds"] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  j["optimizer"]["T"] = 6;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const SweepResult serial = run_sweep(cfg, SweepAxis::Dimension, {8.0, 16.0}, 1);
  const SweepResult parallel = run_sweep(cfg, SweepAxis::Dimension, {8.0, 16.0}, 4);
  REQUIRE(serial.points.size() == parallel.points.size());
  for (std::size_t i = 0; i < serial.points.size(); ++i) {
    CHECK(serial.points[i].median_excess == parallel.points[i].median_excess);
    CHECK(serial.points[i].iqr_excess == parallel.points[i].iqr_excess);
    CHECK(serial.points[i].median_regret == parallel.points[i].median_regret);
  }
}

TEST_CASE("eta grid search records the selected eta in the metrics") {
  json j = minimal_config_json();
  j["optimizer"]["eta_grid"] = true;
  j["optimizer"]["eta"] = 123.0;  // overwritten by the grid
  j["optimizer"]["T"] = 6;
  j["seeds"] = {2};
  const fs::path base = fs::temp_directory_path() / "dp_precond_etagrid";
  fs::remove_all(base);
  j["output_dir"] = base.string();
  const ExperimentOutput out = run_experiment(ExperimentConfig::from_json(j), 1);
  const double eta = out.trials[0].metrics.eta;
  CHECK(eta != 123.0);
  CHECK(eta >= std::ldexp(1.0, -8) - 1e-12);
  CHECK(eta <= std::ldexp(1.0, 2) + 1e-12);
  fs::remove_all(base);
}
