#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dp/common.hpp"
#include "dp/optimizers.hpp"
#include "dp/privacy.hpp"
#include "dp/problems.hpp"
#include "dp/subspace.hpp"
#include "dp/verify.hpp"

namespace dp::harness {

enum class Algorithm { NoisyAdagrad, Adagrad, DpGd, NoisyGd };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct ProblemConfig {
  int p = 10;
  int k = 2;
  int n = 100;
  problems::LossKind loss = problems::LossKind::LogisticRegression;
  double lipschitz_l = 1.0;
  ConstraintSet constraint;
  double label_noise = 0.1;
  double planted_norm = 2.0;
};

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::NoisyAdagrad;
  double eta = 0.1;
  bool eta_grid = false;
  int T = 0;               // explicit horizon when > 0
  bool derived_T = false;  // horizon from private_iteration_count
  double delta_reg = 0.0;  // adagrad regularizer
  double sigma = -1.0;     // gd noise; < 0 means "calibrate from privacy"
};

struct ScheduleConfig {
  double alpha = 0.0;
  bool envelope_mode = false;
  bool spectral_guard = false;
  double sigma_b = 0.0;               // non-private constant noise
  double sigma_B = 0.0;               // non-private constant preconditioner noise
  double envelope_sigma_scale = 1.0;  // sigma_b(t) = scale * envelope(t)
};

struct PrivacyConfig {
  double epsilon = 1.0;
  double delta = 1e-5;
  double calib_constant = 1.0;
  double budget_split = 0.5;
};

// One self-describing JSON document, schema_version 1.
struct ExperimentConfig {
  int schema_version = 1;
  ProblemConfig problem;
  OptimizerConfig optimizer;
  std::optional<PrivacyConfig> privacy;
  subspace::OracleConfig oracle;
  ScheduleConfig schedule;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  int public_n = 0;  // records generated for the public split

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;

  bool is_private() const { return privacy.has_value(); }
  int resolve_horizon() const;  // explicit T or the derived private horizon
  privacy::PrivacyParams privacy_params(int horizon) const;
};

struct TrialResult {
  std::uint64_t seed = 0;
  opt::RunMetrics metrics;
  privacy::BudgetLedger ledger;
  bool has_ledger = false;
  int horizon = 0;
};

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t seed);

// Geometric eta grid {2^-8 .. 2^2} * scale, evaluated by final excess risk on
// a validation run for the given seed.
double select_eta(const ExperimentConfig& config, std::uint64_t validation_seed);

struct ExperimentOutput {
  std::vector<TrialResult> trials;
  std::vector<std::string> written_files;
};

// Runs every configured seed and writes, per seed:
// config.json (echo), metrics.json, steps.csv, ledger.jsonl (private mode).
ExperimentOutput run_experiment(const ExperimentConfig& config, int jobs = 0);

enum class SweepAxis { Dimension, Horizon, Gamma, PublicSamples };

std::string sweep_axis_name(SweepAxis a);
SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepPoint {
  double axis_value = 0.0;
  double median_excess = 0.0;
  double q25_excess = 0.0;
  double q75_excess = 0.0;
  double iqr_excess = 0.0;
  double median_regret = 0.0;
  int seed_count = 0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Dimension;
  std::vector<SweepPoint> points;
};

// Parallel trial fan-out over (axis value, seed); deterministic aggregation
// ordered by (value, seed). Requires >= 2 values and >= 10 seeds.
SweepResult run_sweep(const ExperimentConfig& config_template, SweepAxis axis,
                      const std::vector<double>& values, int jobs = 0);

// Writes sweep.csv / sweep.json / sweep_trials.csv under config.output_dir.
SweepResult run_sweep_to_files(const ExperimentConfig& config_template, SweepAxis axis,
                               const std::vector<double>& values, int jobs = 0);

// Resolves the worker count: DP_PRECOND_JOBS env overrides the flag,
// which overrides hardware concurrency.
int resolve_jobs(int flag_value);

nlohmann::json metrics_to_json(const TrialResult& trial);
std::string steps_to_csv(const opt::RunMetrics& metrics);

}  // namespace dp::harness
