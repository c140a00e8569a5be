#include "dp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace dp::harness {

using nlohmann::json;

namespace fs = std::filesystem;

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::NoisyAdagrad: return "noisy_adagrad";
    case Algorithm::Adagrad: return "adagrad";
    case Algorithm::DpGd: return "dp_gd";
    case Algorithm::NoisyGd: return "noisy_gd";
  }
  throw InvalidParams("algorithm_name: bad enum");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "noisy_adagrad") return Algorithm::NoisyAdagrad;
  if (name == "adagrad") return Algorithm::Adagrad;
  if (name == "dp_gd") return Algorithm::DpGd;
  if (name == "noisy_gd") return Algorithm::NoisyGd;
  throw ConfigError("unknown algorithm: " + name);
}

std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Dimension: return "dimension";
    case SweepAxis::Horizon: return "horizon";
    case SweepAxis::Gamma: return "gamma";
    case SweepAxis::PublicSamples: return "public_samples";
  }
  throw InvalidParams("sweep_axis_name: bad enum");
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "dimension") return SweepAxis::Dimension;
  if (name == "horizon") return SweepAxis::Horizon;
  if (name == "gamma") return SweepAxis::Gamma;
  if (name == "public_samples") return SweepAxis::PublicSamples;
  throw ConfigError("unknown sweep axis: " + name);
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

const json& require_field(const json& j, const std::string& key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing config field: " + path);
  return *it;
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& path) {
  try {
    return require_field(j, key, path).get<T>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("invalid config field: " + path);
  }
}

template <typename T>
T optional_field(const json& j, const std::string& key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

ConstraintSet constraint_from_json(const json& j) {
  const std::string kind = require<std::string>(j, "kind", "problem.constraint.kind");
  if (kind == "unconstrained") return ConstraintSet::unconstrained();
  if (kind == "ball")
    return ConstraintSet::ball(require<double>(j, "radius", "problem.constraint.radius"));
  throw ConfigError("unknown constraint kind: " + kind);
}

json constraint_to_json(const ConstraintSet& c) {
  if (c.is_ball()) return json{{"kind", "ball"}, {"radius", c.radius}};
  return json{{"kind", "unconstrained"}};
}

std::string format_g17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidParams("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  if (v.size() % 2 == 1) return v[m];
  return 0.5 * (v[m - 1] + v[m]);
}

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

int resolve_jobs(int flag_value) {
  if (const char* env = std::getenv("DP_PRECOND_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
      throw ConfigError("DP_PRECOND_JOBS is not a positive integer");
    }
    throw ConfigError("DP_PRECOND_JOBS is not a positive integer");
  }
  if (flag_value >= 1) return flag_value;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.schema_version = require<int>(j, "schema_version", "schema_version");
  if (cfg.schema_version != 1) throw ConfigError("unsupported schema_version");

  const json& jp = require_field(j, "problem", "problem");
  cfg.problem.p = require<int>(jp, "p", "problem.p");
  cfg.problem.k = require<int>(jp, "k", "problem.k");
  cfg.problem.n = require<int>(jp, "n", "problem.n");
  cfg.problem.loss =
      problems::loss_kind_from_name(require<std::string>(jp, "loss", "problem.loss"));
  cfg.problem.lipschitz_l = optional_field(jp, "lipschitz_l", 1.0);
  cfg.problem.constraint =
      constraint_from_json(require_field(jp, "constraint", "problem.constraint"));
  cfg.problem.label_noise = optional_field(jp, "label_noise", 0.1);
  cfg.problem.planted_norm = optional_field(jp, "planted_norm", 2.0);

  const json& jo = require_field(j, "optimizer", "optimizer");
  cfg.optimizer.algorithm =
      algorithm_from_name(require<std::string>(jo, "algorithm", "optimizer.algorithm"));
  cfg.optimizer.eta = require<double>(jo, "eta", "optimizer.eta");
  cfg.optimizer.eta_grid = optional_field(jo, "eta_grid", false);
  const json& jt = require_field(jo, "T", "optimizer.T");
  if (jt.is_string()) {
    if (jt.get<std::string>() != "derived")
      throw ConfigError("optimizer.T must be a positive integer or \"derived\"");
    cfg.optimizer.derived_T = true;
    cfg.optimizer.T = 0;
  } else {
    cfg.optimizer.T = jt.get<int>();
    cfg.optimizer.derived_T = false;
  }
  cfg.optimizer.delta_reg = optional_field(jo, "delta_reg", 0.0);
  cfg.optimizer.sigma = optional_field(jo, "sigma", -1.0);

  if (j.contains("privacy") && !j.at("privacy").is_null()) {
    const json& jpr = j.at("privacy");
    PrivacyConfig pc;
    pc.epsilon = require<double>(jpr, "epsilon", "privacy.epsilon");
    pc.delta = require<double>(jpr, "delta", "privacy.delta");
    pc.calib_constant = optional_field(jpr, "calib_constant", 1.0);
    pc.budget_split = optional_field(jpr, "budget_split", 0.5);
    cfg.privacy = pc;
  }

  const json& jor = require_field(j, "oracle", "oracle");
  cfg.oracle.kind =
      subspace::oracle_kind_from_name(require<std::string>(jor, "kind", "oracle.kind"));
  cfg.oracle.k = require<int>(jor, "k", "oracle.k");
  cfg.oracle.public_m = optional_field(jor, "public_m", 0);
  cfg.oracle.corruption_angle = optional_field(jor, "corruption_angle", 0.0);
  cfg.oracle.refresh = optional_field<std::string>(jor, "refresh", "per_step") == "initial"
                           ? subspace::OracleRefresh::Initial
                           : subspace::OracleRefresh::PerStep;

  const json& js = require_field(j, "schedule", "schedule");
  cfg.schedule.alpha = optional_field(js, "alpha", 0.0);
  cfg.schedule.envelope_mode = optional_field(js, "envelope_mode", false);
  cfg.schedule.spectral_guard = optional_field(js, "spectral_guard", false);
  cfg.schedule.sigma_b = optional_field(js, "sigma_b", 0.0);
  cfg.schedule.sigma_B = optional_field(js, "sigma_B", 0.0);
  cfg.schedule.envelope_sigma_scale = optional_field(js, "envelope_sigma_scale", 1.0);

  cfg.seeds = require<std::vector<std::uint64_t>>(j, "seeds", "seeds");
  cfg.output_dir = require<std::string>(j, "output_dir", "output_dir");
  cfg.public_n = optional_field(j, "public_n", 0);

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["problem"] = json{{"p", problem.p},
                      {"k", problem.k},
                      {"n", problem.n},
                      {"loss", problems::loss_kind_name(problem.loss)},
                      {"lipschitz_l", problem.lipschitz_l},
                      {"constraint", constraint_to_json(problem.constraint)},
                      {"label_noise", problem.label_noise},
                      {"planted_norm", problem.planted_norm}};
  j["optimizer"] = json{{"algorithm", algorithm_name(optimizer.algorithm)},
                        {"eta", optimizer.eta},
                        {"eta_grid", optimizer.eta_grid},
                        {"delta_reg", optimizer.delta_reg},
                        {"sigma", optimizer.sigma}};
  if (optimizer.derived_T)
    j["optimizer"]["T"] = "derived";
  else
    j["optimizer"]["T"] = optimizer.T;
  if (privacy.has_value())
    j["privacy"] = json{{"epsilon", privacy->epsilon},
                        {"delta", privacy->delta},
                        {"calib_constant", privacy->calib_constant},
                        {"budget_split", privacy->budget_split}};
  else
    j["privacy"] = nullptr;
  j["oracle"] = json{
      {"kind", subspace::oracle_kind_name(oracle.kind)},
      {"k", oracle.k},
      {"public_m", oracle.public_m},
      {"corruption_angle", oracle.corruption_angle},
      {"refresh", oracle.refresh == subspace::OracleRefresh::Initial ? "initial" : "per_step"}};
  j["schedule"] = json{{"alpha", schedule.alpha},
                       {"envelope_mode", schedule.envelope_mode},
                       {"spectral_guard", schedule.spectral_guard},
                       {"sigma_b", schedule.sigma_b},
                       {"sigma_B", schedule.sigma_B},
                       {"envelope_sigma_scale", schedule.envelope_sigma_scale}};
  j["seeds"] = seeds;
  j["output_dir"] = output_dir;
  j["public_n"] = public_n;
  return j;
}

void ExperimentConfig::validate() const {
  if (problem.p < 1 || problem.k < 1 || problem.k > problem.p)
    throw ConfigError("problem: need 1 <= k <= p");
  if (problem.n < 2) throw ConfigError("problem.n must be >= 2");
  if (!(problem.lipschitz_l > 0.0)) throw ConfigError("problem.lipschitz_l must be positive");
  if (!(optimizer.eta > 0.0)) throw ConfigError("optimizer.eta must be positive");
  if (!optimizer.derived_T && optimizer.T < 1)
    throw ConfigError("optimizer.T must be a positive integer or \"derived\"");
  if (optimizer.derived_T && !privacy.has_value())
    throw ConfigError("optimizer.T: \"derived\" requires a privacy block");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
  if (is_private() && schedule.envelope_mode)
    throw ConfigError("private mode forbids envelope-proportional sigma_b");
  if (optimizer.algorithm == Algorithm::DpGd && problem.constraint.is_ball())
    throw ConfigError("dp_gd requires an unconstrained problem");
  if (oracle.kind == subspace::OracleKind::PublicData && public_n < oracle.public_m)
    throw ConfigError("public_n must cover oracle.public_m");
  oracle.validate();
  if (is_private()) {
    if (!(privacy->epsilon > 0.0)) throw ConfigError("privacy.epsilon must be positive");
    if (!(privacy->delta > 0.0 && privacy->delta < 1.0))
      throw ConfigError("privacy.delta must be in (0,1)");
  }
  if (!is_private() && optimizer.sigma < 0.0 &&
      (optimizer.algorithm == Algorithm::DpGd || optimizer.algorithm == Algorithm::NoisyGd))
    throw ConfigError("gd runs need optimizer.sigma >= 0 or a privacy block");
}

int ExperimentConfig::resolve_horizon() const {
  if (!optimizer.derived_T) return optimizer.T;
  const long long t =
      privacy::private_iteration_count(privacy->epsilon, problem.n, schedule.alpha);
  if (t > 2'000'000) throw ConfigError("derived horizon too large for this harness");
  return static_cast<int>(t);
}

privacy::PrivacyParams ExperimentConfig::privacy_params(int horizon) const {
  if (!is_private()) throw InvalidParams("privacy_params: non-private config");
  privacy::PrivacyParams params;
  params.epsilon = privacy->epsilon;
  params.delta = privacy->delta;
  params.n = problem.n;
  params.T = horizon;
  params.lipschitz_l = problem.lipschitz_l;
  params.calib_constant_c = privacy->calib_constant;
  params.budget_split = privacy->budget_split;
  return params;
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

namespace {

struct TrialProblem {
  problems::ErmProblem problem;
  problems::ErmProblem public_split;
  bool has_public = false;
  Eigen::MatrixXd true_basis;
};

TrialProblem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Rng gen_rng = rng.fork("problem");
  problems::GeneratorOptions gopts;
  gopts.label_noise = cfg.problem.label_noise;
  gopts.planted_norm = cfg.problem.planted_norm;
  problems::LowRankSpec spec{cfg.problem.p, cfg.problem.k, seed};

  const int total_n = cfg.problem.n + cfg.public_n;
  problems::GeneratedProblem gen =
      problems::generate_low_rank_glm_full(spec, total_n, cfg.problem.loss, gen_rng, gopts);

  TrialProblem out;
  out.true_basis = gen.true_projector.basis();

  if (cfg.public_n > 0) {
    // Tail records form the public split; both halves share the generator.
    const auto& f = gen.problem.dataset.features;
    const auto& l = gen.problem.dataset.labels;
    out.problem.dataset = problems::Dataset(f.topRows(cfg.problem.n), l.head(cfg.problem.n));
    out.public_split.dataset =
        problems::Dataset(f.bottomRows(cfg.public_n), l.tail(cfg.public_n));
    out.public_split.loss_kind = cfg.problem.loss;
    out.public_split.lipschitz_l = cfg.problem.lipschitz_l;
    out.public_split.constraint = ConstraintSet::unconstrained();
    out.has_public = true;
  } else {
    out.problem.dataset = std::move(gen.problem.dataset);
  }
  out.problem.loss_kind = cfg.problem.loss;
  out.problem.lipschitz_l = cfg.problem.lipschitz_l;
  out.problem.constraint = cfg.problem.constraint;
  return out;
}

opt::NoiseSchedule build_schedule(const ExperimentConfig& cfg, int horizon) {
  opt::NoiseSchedule schedule;
  if (cfg.is_private()) {
    schedule = opt::NoiseSchedule::calibrated(cfg.privacy_params(horizon));
  } else if (cfg.schedule.envelope_mode) {
    schedule = opt::NoiseSchedule::envelope_proportional(cfg.problem.lipschitz_l,
                                                         cfg.schedule.alpha,
                                                         cfg.schedule.envelope_sigma_scale,
                                                         cfg.schedule.sigma_B);
  } else {
    schedule = opt::NoiseSchedule::constant(cfg.schedule.sigma_b, cfg.schedule.sigma_B);
  }
  schedule.alpha = cfg.schedule.alpha;
  schedule.spectral_guard = cfg.schedule.spectral_guard;
  return schedule;
}

double resolve_gd_sigma(const ExperimentConfig& cfg, int horizon) {
  if (cfg.optimizer.sigma >= 0.0) return cfg.optimizer.sigma;
  // Single-stream calibration: full (epsilon, delta) budget on gradients.
  const PrivacyConfig& pc = *cfg.privacy;
  return pc.calib_constant *
         privacy::gradient_sensitivity(cfg.problem.lipschitz_l, cfg.problem.n) *
         std::sqrt(horizon * std::log(1.0 / pc.delta)) / pc.epsilon;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int horizon = cfg.resolve_horizon();
  TrialProblem tp = build_problem(cfg, seed);

  TrialResult result;
  result.seed = seed;
  result.horizon = horizon;
  result.has_ledger = cfg.is_private();

  opt::RunOptions opts;
  opts.true_subspace_basis = &tp.true_basis;
  if (tp.has_public) opts.public_problem = &tp.public_split;
  if (result.has_ledger) opts.ledger = &result.ledger;

  Rng run_rng = Rng(seed).fork("run");

  switch (cfg.optimizer.algorithm) {
    case Algorithm::NoisyAdagrad: {
      const opt::NoiseSchedule schedule = build_schedule(cfg, horizon);
      result.metrics = opt::noisy_adagrad_run(tp.problem, schedule, cfg.oracle,
                                              cfg.optimizer.eta, horizon, run_rng, opts);
      break;
    }
    case Algorithm::Adagrad: {
      result.metrics = opt::adagrad_run(tp.problem, cfg.optimizer.eta,
                                        cfg.optimizer.delta_reg, horizon, run_rng, opts);
      break;
    }
    case Algorithm::DpGd:
    case Algorithm::NoisyGd: {
      const double sigma = resolve_gd_sigma(cfg, horizon);
      opts.sigma_floor = cfg.is_private() ? sigma : 0.0;
      if (cfg.optimizer.algorithm == Algorithm::DpGd)
        result.metrics = opt::dp_gd_run(tp.problem, sigma, cfg.optimizer.eta, horizon,
                                        run_rng, opts);
      else
        result.metrics = opt::noisy_gd_run(tp.problem, sigma, cfg.optimizer.eta, horizon,
                                           run_rng, opts);
      break;
    }
  }
  if (result.has_ledger) result.ledger.assert_compliant();
  return result;
}

double select_eta(const ExperimentConfig& cfg, std::uint64_t validation_seed) {
  const double scale =
      cfg.problem.constraint.is_ball() ? cfg.problem.constraint.diameter() : 1.0;
  double best_eta = cfg.optimizer.eta;
  double best_excess = std::numeric_limits<double>::infinity();
  ExperimentConfig probe = cfg;
  probe.optimizer.eta_grid = false;
  for (int e = -8; e <= 2; ++e) {
    probe.optimizer.eta = std::ldexp(scale, e);
    const TrialResult trial = run_trial(probe, validation_seed);
    if (trial.metrics.excess_risk < best_excess) {
      best_excess = trial.metrics.excess_risk;
      best_eta = probe.optimizer.eta;
    }
  }
  return best_eta;
}

// ---------------------------------------------------------------------------
// Output serialization
// ---------------------------------------------------------------------------

json metrics_to_json(const TrialResult& trial) {
  const opt::RunMetrics& m = trial.metrics;
  json j;
  j["seed"] = trial.seed;
  j["T"] = m.T;
  j["p"] = m.p;
  j["eta"] = m.eta;
  j["regret"] = m.regret;
  j["excess_risk"] = m.excess_risk;
  j["loss_star"] = m.loss_star;
  j["reference_converged"] = m.reference_converged;
  j["trace_g_final"] = m.trace_g_final;
  j["intrinsic_dim"] = m.intrinsic_dim;
  j["guard_violation_fraction"] = m.guard_violation_fraction;
  j["all_feasible"] = m.all_feasible;
  j["max_iterate_norm"] = m.max_iterate_norm;
  j["rank_m"] = m.rank_m;
  j["theta_star_m_norm"] = m.theta_star_m_norm;
  j["theta_priv"] = std::vector<double>(m.theta_priv.data(),
                                        m.theta_priv.data() + m.theta_priv.size());
  j["theta_star"] = std::vector<double>(m.theta_star_ref.data(),
                                        m.theta_star_ref.data() + m.theta_star_ref.size());
  return j;
}

std::string steps_to_csv(const opt::RunMetrics& m) {
  std::ostringstream os;
  os << "t,loss,grad_norm,trace_g,trace_g_pinv,k_t,gamma_t,guard_violation,sigma_b,"
        "sigma_B_requested,sigma_B_effective,grad_quad_pinv_g,max_example_grad,envelope\n";
  for (const opt::StepRecord& s : m.steps) {
    os << s.t << ',' << format_g17(s.loss) << ',' << format_g17(s.grad_norm) << ','
       << format_g17(s.trace_g) << ',' << format_g17(s.trace_g_pinv) << ',' << s.k_t << ','
       << format_g17(s.gamma_t) << ',' << (s.sigma_guard_violation ? 1 : 0) << ','
       << format_g17(s.sigma_b) << ',' << format_g17(s.sigma_B_requested) << ','
       << format_g17(s.sigma_B_effective) << ',' << format_g17(s.grad_quad_pinv_g) << ','
       << format_g17(s.max_example_grad) << ',' << format_g17(s.envelope) << '\n';
  }
  return os.str();
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  ExperimentOutput out;
  out.trials.resize(cfg.seeds.size());

  ExperimentConfig effective = cfg;
  if (cfg.optimizer.eta_grid) {
    effective.optimizer.eta = select_eta(cfg, cfg.seeds.front());
    effective.optimizer.eta_grid = false;
  }

  const int n_jobs = resolve_jobs(jobs);
  parallel_for(static_cast<int>(cfg.seeds.size()), n_jobs,
               [&](int i) { out.trials[static_cast<std::size_t>(i)] =
                                run_trial(effective, cfg.seeds[static_cast<std::size_t>(i)]); });

  fs::create_directories(cfg.output_dir);
  const std::string echo = effective.to_json().dump(2) + "\n";
  for (const TrialResult& trial : out.trials) {
    const fs::path dir = fs::path(cfg.output_dir) / ("seed_" + std::to_string(trial.seed));
    fs::create_directories(dir);
    write_text_file((dir / "config.json").string(), echo);
    write_text_file((dir / "metrics.json").string(), metrics_to_json(trial).dump(2) + "\n");
    write_text_file((dir / "steps.csv").string(), steps_to_csv(trial.metrics));
    out.written_files.push_back((dir / "config.json").string());
    out.written_files.push_back((dir / "metrics.json").string());
    out.written_files.push_back((dir / "steps.csv").string());
    if (trial.has_ledger) {
      write_text_file((dir / "ledger.jsonl").string(), trial.ledger.to_jsonl());
      out.written_files.push_back((dir / "ledger.jsonl").string());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

namespace {

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig cfg = base;
  switch (axis) {
    case SweepAxis::Dimension:
      cfg.problem.p = static_cast<int>(std::llround(value));
      break;
    case SweepAxis::Horizon:
      cfg.optimizer.T = static_cast<int>(std::llround(value));
      cfg.optimizer.derived_T = false;
      break;
    case SweepAxis::Gamma: {
      if (!(value >= 0.0 && value <= 1.0))
        throw ConfigError("gamma sweep values must lie in [0, 1]");
      cfg.oracle.kind = subspace::OracleKind::Corrupted;
      cfg.oracle.corruption_angle = std::asin(value);
      break;
    }
    case SweepAxis::PublicSamples: {
      const int m = static_cast<int>(std::llround(value));
      cfg.oracle.kind = subspace::OracleKind::PublicData;
      cfg.oracle.public_m = m;
      cfg.public_n = std::max(cfg.public_n, m);
      break;
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis,
                      const std::vector<double>& values, int jobs) {
  if (values.size() < 2) throw ConfigError("sweep: need at least 2 axis values");
  if (base.seeds.size() < 10) throw ConfigError("sweep: need at least 10 seeds per point");

  std::vector<ExperimentConfig> configs;
  configs.reserve(values.size());
  for (double v : values) configs.push_back(apply_axis(base, axis, v));

  const int n_values = static_cast<int>(values.size());
  const int n_seeds = static_cast<int>(base.seeds.size());
  const int total = n_values * n_seeds;
  std::vector<TrialResult> trials(static_cast<std::size_t>(total));

  const int n_jobs = resolve_jobs(jobs);
  parallel_for(total, n_jobs, [&](int idx) {
    const int vi = idx / n_seeds;
    const int si = idx % n_seeds;
    trials[static_cast<std::size_t>(idx)] =
        run_trial(configs[static_cast<std::size_t>(vi)],
                  base.seeds[static_cast<std::size_t>(si)]);
  });

  SweepResult result;
  result.axis = axis;
  for (int vi = 0; vi < n_values; ++vi) {
    std::vector<double> excess, regret;
    for (int si = 0; si < n_seeds; ++si) {
      const TrialResult& t = trials[static_cast<std::size_t>(vi * n_seeds + si)];
      excess.push_back(t.metrics.excess_risk);
      regret.push_back(t.metrics.regret);
    }
    SweepPoint point;
    point.axis_value = values[static_cast<std::size_t>(vi)];
    point.median_excess = median_of(excess);
    point.q25_excess = quantile_of(excess, 0.25);
    point.q75_excess = quantile_of(excess, 0.75);
    point.iqr_excess = point.q75_excess - point.q25_excess;
    point.median_regret = median_of(regret);
    point.seed_count = n_seeds;
    result.points.push_back(point);
  }
  return result;
}

SweepResult run_sweep_to_files(const ExperimentConfig& base, SweepAxis axis,
                               const std::vector<double>& values, int jobs) {
  const SweepResult result = run_sweep(base, axis, values, jobs);
  fs::create_directories(base.output_dir);

  std::ostringstream csv;
  csv << "axis,value,median_excess,q25_excess,q75_excess,iqr_excess,median_regret,seed_count\n";
  json jpoints = json::array();
  for (const SweepPoint& pt : result.points) {
    csv << sweep_axis_name(axis) << ',' << format_g17(pt.axis_value) << ','
        << format_g17(pt.median_excess) << ',' << format_g17(pt.q25_excess) << ','
        << format_g17(pt.q75_excess) << ',' << format_g17(pt.iqr_excess) << ','
        << format_g17(pt.median_regret) << ',' << pt.seed_count << '\n';
    jpoints.push_back(json{{"value", pt.axis_value},
                           {"median_excess", pt.median_excess},
                           {"q25_excess", pt.q25_excess},
                           {"q75_excess", pt.q75_excess},
                           {"iqr_excess", pt.iqr_excess},
                           {"median_regret", pt.median_regret},
                           {"seed_count", pt.seed_count}});
  }
  write_text_file((fs::path(base.output_dir) / "sweep.csv").string(), csv.str());
  json j{{"axis", sweep_axis_name(axis)}, {"points", jpoints}};

  // Horizon sweeps with enough points get a log-log rate report attached.
  if (axis == SweepAxis::Horizon && result.points.size() >= 4) {
    std::vector<std::pair<double, double>> regret_series, excess_series;
    bool positive = true;
    for (const SweepPoint& pt : result.points) {
      positive = positive && pt.median_regret > 0.0 && pt.median_excess > 0.0;
      regret_series.emplace_back(pt.axis_value, pt.median_regret);
      excess_series.emplace_back(pt.axis_value, pt.median_excess);
    }
    if (positive) {
      const opt::RateFit regret_fit = opt::rate_fit(regret_series);
      const opt::RateFit excess_fit = opt::rate_fit(excess_series);
      j["rate_fit"] = json{{"regret_slope", regret_fit.slope},
                           {"regret_r_squared", regret_fit.r_squared},
                           {"excess_slope", excess_fit.slope},
                           {"excess_r_squared", excess_fit.r_squared}};
    }
  }
  write_text_file((fs::path(base.output_dir) / "sweep.json").string(), j.dump(2) + "\n");
  return result;
}

}  // namespace dp::harness
