#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dp/harness.hpp"
#include "dp/privacy.hpp"
#include "dp/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitVerifyFailure = 2;
constexpr int kExitRuntimeError = 3;

std::vector<double> parse_csv_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    values.push_back(std::stod(cell));
  }
  if (values.empty()) throw dp::ConfigError("--values: no values parsed");
  return values;
}

int cmd_run(const std::string& config_path, int jobs) {
  const dp::harness::ExperimentConfig cfg =
      dp::harness::ExperimentConfig::from_file(config_path);
  const dp::harness::ExperimentOutput out = dp::harness::run_experiment(cfg, jobs);
  for (const dp::harness::TrialResult& t : out.trials) {
    std::cout << "seed " << t.seed << ": T=" << t.horizon
              << " excess_risk=" << t.metrics.excess_risk << " regret=" << t.metrics.regret
              << (t.has_ledger ? " ledger=ok" : "") << '\n';
  }
  std::cout << "wrote " << out.written_files.size() << " files under " << cfg.output_dir << '\n';
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& axis_name,
              const std::string& values_csv, int jobs) {
  const dp::harness::ExperimentConfig cfg =
      dp::harness::ExperimentConfig::from_file(config_path);
  const dp::harness::SweepAxis axis = dp::harness::sweep_axis_from_name(axis_name);
  const std::vector<double> values = parse_csv_values(values_csv);
  const dp::harness::SweepResult result =
      dp::harness::run_sweep_to_files(cfg, axis, values, jobs);
  for (const dp::harness::SweepPoint& pt : result.points) {
    std::cout << dp::harness::sweep_axis_name(axis) << "=" << pt.axis_value
              << " median_excess=" << pt.median_excess << " iqr=" << pt.iqr_excess
              << " seeds=" << pt.seed_count << '\n';
  }
  std::cout << "sweep outputs under " << cfg.output_dir << '\n';
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, int trials, const std::string& json_path) {
  const dp::verify::VerifyReport report = dp::verify::verify_all(seed, trials);
  dp::verify::print_report(report, std::cout);
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw dp::IoError("cannot open for writing: " + json_path);
    out << dp::verify::report_to_json(report) << '\n';
  }
  return report.all_pass ? kExitOk : kExitVerifyFailure;
}

int cmd_calibrate(double epsilon, double delta, int n, int horizon, double lipschitz_l,
                  double calib_constant, double split) {
  dp::privacy::PrivacyParams params;
  params.epsilon = epsilon;
  params.delta = delta;
  params.n = n;
  params.T = horizon;
  params.lipschitz_l = lipschitz_l;
  params.calib_constant_c = calib_constant;
  params.budget_split = split;
  params.validate();

  const double sigma_b = dp::privacy::calibrate_sigma_b(params);
  std::printf("gradient stream:        sensitivity=%.6g  sigma_b=%.6g (all t)\n",
              dp::privacy::gradient_sensitivity(lipschitz_l, n), sigma_b);
  std::printf("preconditioner stream:\n");
  std::printf("%8s  %14s  %14s\n", "t", "sensitivity", "sigma_B(t)");
  for (int t = 1; t <= horizon; t = t < horizon ? std::min(horizon, t * 2) : horizon + 1) {
    std::printf("%8d  %14.6g  %14.6g\n", t,
                dp::privacy::preconditioner_sensitivity(lipschitz_l, n, t),
                dp::privacy::calibrate_sigma_B(params, t));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private pre-conditioned optimization harness"};
  app.require_subcommand(1);

  std::string config_path, axis_name, values_csv, json_path;
  int jobs = 0;
  std::uint64_t seed = 1;
  int trials = 1000;
  double epsilon = 1.0, delta = 1e-5, lipschitz_l = 1.0, calib_constant = 1.0, split = 0.5;
  int n = 100, horizon = 100;

  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--jobs", jobs, "worker count (env DP_PRECOND_JOBS overrides)");

  CLI::App* sweep = app.add_subcommand("sweep", "sweep one axis of a config");
  sweep->add_option("--config", config_path, "experiment config JSON")->required();
  sweep->add_option("--axis", axis_name, "dimension|horizon|gamma|public_samples")->required();
  sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
  sweep->add_option("--jobs", jobs, "worker count (env DP_PRECOND_JOBS overrides)");

  CLI::App* verify = app.add_subcommand("verify", "run the lemma property suites");
  verify->add_option("--seed", seed, "base seed");
  verify->add_option("--trials", trials, "instances per suite");
  verify->add_option("--json", json_path, "write the machine-readable report here");

  CLI::App* calibrate = app.add_subcommand("calibrate", "print calibrated noise scales");
  calibrate->add_option("--epsilon", epsilon)->required();
  calibrate->add_option("--delta", delta)->required();
  calibrate->add_option("--n", n)->required();
  calibrate->add_option("--T", horizon)->required();
  calibrate->add_option("--L", lipschitz_l)->required();
  calibrate->add_option("--c", calib_constant, "calibration constant (default 1)");
  calibrate->add_option("--split", split, "gradient-stream budget fraction (default 0.5)");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path, jobs);
    if (sweep->parsed()) return cmd_sweep(config_path, axis_name, values_csv, jobs);
    if (verify->parsed()) {
      if (trials < 1) throw dp::ConfigError("verify: --trials must be >= 1");
      return cmd_verify(seed, trials, json_path);
    }
    if (calibrate->parsed())
      return cmd_calibrate(epsilon, delta, n, horizon, lipschitz_l, calib_constant, split);
    return kExitConfigError;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfigError;
  } catch (const dp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const dp::InvalidParams& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const dp::Error& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}
