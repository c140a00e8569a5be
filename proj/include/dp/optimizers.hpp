#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dp/common.hpp"
#include "dp/linalg.hpp"
#include "dp/privacy.hpp"
#include "dp/problems.hpp"
#include "dp/subspace.hpp"

namespace dp::opt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// NoiseSchedule: per-step gradient noise sigma_b(t), preconditioner noise
// sigma_B(t), the gradient-decay exponent alpha, and the envelope L(t) that
// (optionally) drives schedule clipping. When spectral_guard is on, the
// effective sigma_B(t) is clamped to 2*lambda_min>0(G_t); the requested
// value is still ledger-recorded. Floors are the calibrated minima used by
// the ledger assert (zero in non-private mode).
// ---------------------------------------------------------------------------
struct NoiseSchedule {
  std::function<double(int)> sigma_b = [](int) { return 0.0; };
  std::function<double(int)> sigma_B = [](int) { return 0.0; };
  double alpha = 0.0;
  std::function<double(int)> envelope_l = [](int) {
    return std::numeric_limits<double>::infinity();
  };
  bool envelope_clipping = false;  // clip per-example gradients to envelope_l(t)
  bool spectral_guard = false;

  std::function<double(int)> sigma_b_floor = [](int) { return 0.0; };
  std::function<double(int)> sigma_B_floor = [](int) { return 0.0; };

  static NoiseSchedule noiseless();
  static NoiseSchedule constant(double sigma_b_value, double sigma_B_value);
  // Private mode: calibrated sigmas, floors equal to the calibration, no
  // envelope proportionality, no clamping.
  static NoiseSchedule calibrated(const privacy::PrivacyParams& params);
  // Rate experiments: envelope_l(t) = l0 * t^-alpha, sigma_b proportional to
  // the envelope, per-example clipping follows the envelope.
  static NoiseSchedule envelope_proportional(double l0, double alpha, double sigma_scale,
                                             double sigma_B_value = 0.0);
};

// Per-step optimizer snapshot: the predicted iterate and the pre-projection
// point y_{t+1} (captured when RunOptions::record_state is set).
struct OptimizerState {
  VectorXd theta;  // theta_t
  int step_t = 0;
  VectorXd pre_projection_iterate;  // y_{t+1}
};

// Dense per-step snapshot of the preconditioner pipeline (captured only when
// RunOptions::record_state is set; intended for tests at small dimensions).
struct PreconditionerState {
  linalg::SymMatrix S;
  linalg::SymMatrix G;
  linalg::SymMatrix B;  // preconditioner noise as it enters H (projected)
  linalg::SymMatrix H;
  int k_t = 0;
  double lambda_min_pos_g = 0.0;
  MatrixXd oracle_basis;
};

struct StepRecord {
  int t = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double trace_g = 0.0;
  double trace_g_pinv = 0.0;
  int k_t = 0;
  double gamma_t = 0.0;
  bool sigma_guard_violation = false;
  double sigma_b = 0.0;
  double sigma_B_requested = 0.0;
  double sigma_B_effective = 0.0;
  double grad_quad_pinv_g = 0.0;  // grad^T G_t^+ grad
  double max_example_grad = 0.0;
  double envelope = 0.0;
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  std::vector<VectorXd> iterates;  // theta_1 .. theta_T (as predicted)
  VectorXd theta_priv;
  double regret = 0.0;
  double excess_risk = 0.0;
  VectorXd theta_star_ref;
  double loss_star = 0.0;
  bool reference_converged = false;
  double eta = 0.0;
  int T = 0;
  int p = 0;
  double trace_g_final = 0.0;
  double intrinsic_dim = 0.0;  // Tr(G_T) / |G_T|_op
  double guard_violation_fraction = 0.0;
  bool all_feasible = true;
  double max_iterate_norm = 0.0;
  double theta_star_m_norm = 0.0;  // |theta*|_M (gradient-subspace seminorm)
  int rank_m = 0;
  std::vector<VectorXd> gradient_history;            // when requested
  std::vector<PreconditionerState> state_trace;      // when requested
  std::vector<OptimizerState> optimizer_trace;       // when requested
};

struct RunOptions {
  const problems::ReferenceOptimum* reference = nullptr;
  privacy::BudgetLedger* ledger = nullptr;
  const MatrixXd* true_subspace_basis = nullptr;  // enables gamma_t tracking
  const problems::ErmProblem* public_problem = nullptr;
  bool keep_gradients = false;
  bool record_state = false;
  double rank_tol = linalg::kDefaultRankTol;
  double sigma_floor = 0.0;  // ledger floor for the plain GD runs
  int reference_budget = 0;  // 0: max(2000, 10*T)
};

// ---------------------------------------------------------------------------
// Descent procedures
// ---------------------------------------------------------------------------

// Noisy AdaGrad with gradient-subspace oracle: accumulate S_t with clean
// gradients, G_t = S_t^1/2, B_t = sigma_B(t) * GOE, H_t = Pi_t (G_t + B_t) Pi_t,
// y = theta - eta * pinv(H_t) (grad + b_t), theta <- seminorm projection.
RunMetrics noisy_adagrad_run(const problems::ErmProblem& problem, const NoiseSchedule& schedule,
                             const subspace::OracleConfig& oracle, double eta, int T, Rng rng,
                             const RunOptions& opts = {});

// Vanilla full-matrix AdaGrad with regularizer delta_reg * I.
RunMetrics adagrad_run(const problems::ErmProblem& problem, double eta, double delta_reg, int T,
                       Rng rng, const RunOptions& opts = {});

// Unconstrained DP-GD: theta <- theta - eta (grad + b), b ~ N(0, sigma^2 I_p).
RunMetrics dp_gd_run(const problems::ErmProblem& problem, double sigma, double eta, int T, Rng rng,
                     const RunOptions& opts = {});

// Euclidean-projected noisy GD; the no-preconditioner, no-projection
// baseline arm for the dimension sweeps (supports Ball constraints).
RunMetrics noisy_gd_run(const problems::ErmProblem& problem, double sigma, double eta, int T,
                        Rng rng, const RunOptions& opts = {});

// ---------------------------------------------------------------------------
// Meters
// ---------------------------------------------------------------------------

VectorXd online_to_batch(const std::vector<VectorXd>& iterate_history);

double measure_regret(const problems::ErmProblem& problem,
                      const std::vector<VectorXd>& iterate_history, const VectorXd& theta_star);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double max_abs_residual = 0.0;
};

// Least-squares slope in log-log space over (T, value) pairs.
RateFit rate_fit(const std::vector<std::pair<double, double>>& series);

}  // namespace dp::opt
