#include "dp/optimizers.hpp"

#include <algorithm>
#include <cmath>

namespace dp::opt {

using linalg::SymMatrix;

// ---------------------------------------------------------------------------
// NoiseSchedule factories
// ---------------------------------------------------------------------------

NoiseSchedule NoiseSchedule::noiseless() { return NoiseSchedule{}; }

NoiseSchedule NoiseSchedule::constant(double sigma_b_value, double sigma_B_value) {
  if (sigma_b_value < 0.0 || sigma_B_value < 0.0)
    throw InvalidParams("NoiseSchedule: sigmas must be nonnegative");
  NoiseSchedule s;
  s.sigma_b = [sigma_b_value](int) { return sigma_b_value; };
  s.sigma_B = [sigma_B_value](int) { return sigma_B_value; };
  return s;
}

NoiseSchedule NoiseSchedule::calibrated(const privacy::PrivacyParams& params) {
  params.validate();
  const double sb = privacy::calibrate_sigma_b(params);
  const privacy::PrivacyParams copy = params;
  NoiseSchedule s;
  s.sigma_b = [sb](int) { return sb; };
  s.sigma_B = [copy](int t) { return privacy::calibrate_sigma_B(copy, t); };
  s.sigma_b_floor = s.sigma_b;
  s.sigma_B_floor = s.sigma_B;
  return s;
}

NoiseSchedule NoiseSchedule::envelope_proportional(double l0, double alpha, double sigma_scale,
                                                   double sigma_B_value) {
  if (!(l0 > 0.0)) throw InvalidParams("NoiseSchedule: envelope scale must be positive");
  if (alpha < 0.0) throw InvalidParams("NoiseSchedule: alpha must be >= 0");
  if (sigma_scale < 0.0 || sigma_B_value < 0.0)
    throw InvalidParams("NoiseSchedule: sigmas must be nonnegative");
  NoiseSchedule s;
  s.alpha = alpha;
  s.envelope_l = [l0, alpha](int t) { return l0 * std::pow(static_cast<double>(t), -alpha); };
  s.envelope_clipping = true;
  s.sigma_b = [l0, alpha, sigma_scale](int t) {
    return sigma_scale * l0 * std::pow(static_cast<double>(t), -alpha);
  };
  s.sigma_B = [sigma_B_value](int) { return sigma_B_value; };
  return s;
}

// ---------------------------------------------------------------------------
// Reduced-subspace machinery. Everything the AdaGrad-family runs touch
// (S_t, G_t, Pi_t, H_t, iterates) lives on the span of observed gradients
// and oracle directions; matrices are kept in the coordinates of an
// expanding orthonormal basis of that span. Noise enters through its
// compression onto the span, which has exactly the right distribution by
// orthogonal invariance of the GOE / spherical Gaussian.
// ---------------------------------------------------------------------------

namespace detail {

class RunningBasis {
 public:
  explicit RunningBasis(int ambient) : q_(ambient, 0) {}

  int ambient() const { return static_cast<int>(q_.rows()); }
  int rank() const { return static_cast<int>(q_.cols()); }
  const MatrixXd& q() const { return q_; }

  // Returns 1 if the span grew.
  int absorb(const VectorXd& v) {
    const double scale = v.norm();
    if (scale == 0.0) return 0;
    VectorXd resid = v - q_ * (q_.transpose() * v);
    if (resid.norm() <= 1e-12 * scale) return 0;
    resid -= q_ * (q_.transpose() * resid);
    const double rn = resid.norm();
    if (rn <= 1e-13 * scale) return 0;
    q_.conservativeResize(Eigen::NoChange, q_.cols() + 1);
    q_.col(q_.cols() - 1) = resid / rn;
    return 1;
  }

  int absorb_columns(const MatrixXd& m) {
    int grew = 0;
    for (int j = 0; j < m.cols(); ++j) grew += absorb(m.col(j));
    return grew;
  }

  VectorXd coords(const VectorXd& v) const { return q_.transpose() * v; }
  VectorXd lift(const VectorXd& c) const { return q_ * c; }

 private:
  MatrixXd q_;
};

void pad_square(MatrixXd& m, int grew) {
  if (grew == 0) return;
  const int r = static_cast<int>(m.rows());
  m.conservativeResize(r + grew, r + grew);
  m.rightCols(grew).setZero();
  m.bottomRows(grew).setZero();
}

void pad_vector(VectorXd& v, int grew) {
  if (grew == 0) return;
  v.conservativeResize(v.size() + grew);
  v.tail(grew).setZero();
}

// Spectral summary of the accumulated S in basis coordinates.
struct PreconditionerSpectrum {
  VectorXd lam_s;   // descending, clamped at 0
  MatrixXd w;       // eigenvectors
  VectorXd lam_g;   // sqrt(lam_s)
  double trace_g = 0.0;
  double op_g = 0.0;
  double lam_min_pos_g = 0.0;
  double trace_g_pinv = 0.0;
  int span = 0;  // numerically nonzero directions (permissive cutoff)
};

PreconditionerSpectrum analyze_s(const MatrixXd& s_small, double rank_tol) {
  PreconditionerSpectrum out;
  if (s_small.rows() == 0) return out;
  linalg::SpectralDecomposition eig = linalg::detail::sym_eig(s_small);
  out.lam_s = eig.eigenvalues.cwiseMax(0.0);
  out.w = std::move(eig.eigenvectors);
  out.lam_g = out.lam_s.cwiseSqrt();
  out.trace_g = out.lam_g.sum();
  out.op_g = out.lam_g.size() > 0 ? out.lam_g[0] : 0.0;
  const double g_cutoff = rank_tol * out.op_g;
  const double span_cutoff = 1e-24 * (out.lam_s.size() > 0 ? out.lam_s[0] : 0.0);
  for (int i = 0; i < out.lam_g.size(); ++i) {
    if (out.lam_g[i] > g_cutoff) {
      out.lam_min_pos_g = out.lam_g[i];
      out.trace_g_pinv += 1.0 / out.lam_g[i];
    }
    if (out.lam_s[i] > span_cutoff && out.lam_s[i] > 0.0) out.span = i + 1;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shared finalization
// ---------------------------------------------------------------------------

namespace {

problems::ReferenceOptimum resolve_reference(const problems::ErmProblem& problem, int T,
                                             const RunOptions& opts) {
  if (opts.reference != nullptr) return *opts.reference;
  const int budget = opts.reference_budget > 0 ? opts.reference_budget : std::max(2000, 10 * T);
  return problems::reference_optimum(problem, budget);
}

void finalize_metrics(RunMetrics& metrics, const problems::ErmProblem& problem,
                      const RunOptions& opts) {
  metrics.T = static_cast<int>(metrics.steps.size());
  metrics.p = problem.p();
  metrics.theta_priv = online_to_batch(metrics.iterates);

  const problems::ReferenceOptimum ref = resolve_reference(problem, metrics.T, opts);
  metrics.theta_star_ref = ref.theta_star;
  metrics.loss_star = ref.loss_star;
  metrics.reference_converged = ref.converged;

  double loss_sum = 0.0;
  int violations = 0;
  for (const StepRecord& s : metrics.steps) {
    loss_sum += s.loss;
    if (s.sigma_guard_violation) ++violations;
  }
  metrics.regret = loss_sum / metrics.T - ref.loss_star;
  metrics.excess_risk = problems::batch_loss(problem, metrics.theta_priv) - ref.loss_star;
  metrics.guard_violation_fraction = static_cast<double>(violations) / metrics.T;
  if (!metrics.steps.empty()) metrics.trace_g_final = metrics.steps.back().trace_g;
}

void track_feasibility(RunMetrics& metrics, const problems::ErmProblem& problem,
                       const VectorXd& theta) {
  const double norm = theta.norm();
  metrics.max_iterate_norm = std::max(metrics.max_iterate_norm, norm);
  if (!problem.constraint.contains(norm, 1e-9)) metrics.all_feasible = false;
}

void fill_m_projection_stats(RunMetrics& metrics, const problems::ErmProblem& problem) {
  const MatrixXd basis = linalg::detail::orthonormal_span(problem.dataset.features.transpose());
  metrics.rank_m = static_cast<int>(basis.cols());
  metrics.theta_star_m_norm = (basis.transpose() * metrics.theta_star_ref).norm();
}

VectorXd sample_normal_vector(int dim, double sd, Rng& rng) {
  VectorXd v = VectorXd::Zero(dim);
  if (sd > 0.0)
    for (int i = 0; i < dim; ++i) v[i] = sd * rng.normal();
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Noisy AdaGrad (gradient-subspace oracle)
// ---------------------------------------------------------------------------

RunMetrics noisy_adagrad_run(const problems::ErmProblem& problem, const NoiseSchedule& schedule,
                             const subspace::OracleConfig& oracle, double eta, int T, Rng rng,
                             const RunOptions& opts) {
  if (!(eta > 0.0)) throw InvalidParams("noisy_adagrad_run: eta must be positive");
  if (T < 1) throw InvalidParams("noisy_adagrad_run: T must be >= 1");
  oracle.validate();
  if (oracle.kind == subspace::OracleKind::PublicData && opts.public_problem == nullptr)
    throw InvalidParams("noisy_adagrad_run: PublicData oracle needs a public problem");
  if (oracle.kind == subspace::OracleKind::PublicData &&
      opts.public_problem->p() != problem.p())
    throw DimensionMismatch("noisy_adagrad_run: public split dimension mismatch");
  if (oracle.kind == subspace::OracleKind::Corrupted && opts.true_subspace_basis == nullptr)
    throw InvalidParams("noisy_adagrad_run: Corrupted oracle needs the true subspace basis");

  const int p = problem.p();
  Rng rng_goe = rng.fork("goe");
  Rng rng_grad_noise = rng.fork("gradient-noise");
  Rng rng_oracle = rng.fork("oracle");

  detail::RunningBasis basis(p);
  MatrixXd s_small(0, 0);
  VectorXd theta_coords(0);

  RunMetrics metrics;
  metrics.eta = eta;
  metrics.steps.reserve(T);
  metrics.iterates.reserve(T);

  // Fixed oracle directions (Corrupted always; PublicData with Initial refresh).
  MatrixXd fixed_oracle_basis;
  bool have_fixed_oracle = false;

  int consecutive_degenerate = 0;

  for (int t = 1; t <= T; ++t) {
    const VectorXd theta = basis.lift(theta_coords);
    metrics.iterates.push_back(theta);
    track_feasibility(metrics, problem, theta);

    StepRecord rec;
    rec.t = t;
    rec.envelope =
        schedule.envelope_clipping ? schedule.envelope_l(t) : problem.lipschitz_l;
    if (!(rec.envelope > 0.0)) throw InvalidParams("noisy_adagrad_run: envelope must be positive");

    const VectorXd grad =
        problems::batch_gradient(problem, theta, rec.envelope, &rec.max_example_grad);
    rec.loss = problems::batch_loss(problem, theta);
    rec.grad_norm = grad.norm();
    if (opts.keep_gradients) metrics.gradient_history.push_back(grad);

    int grew = basis.absorb(grad);

    // Oracle directions may add span beyond the private gradients.
    if (oracle.kind == subspace::OracleKind::Corrupted && !have_fixed_oracle) {
      fixed_oracle_basis =
          subspace::corrupted_oracle_basis(*opts.true_subspace_basis, oracle.corruption_angle,
                                           rng_oracle);
      have_fixed_oracle = true;
    }
    if (oracle.kind == subspace::OracleKind::PublicData &&
        (oracle.refresh == subspace::OracleRefresh::PerStep || !have_fixed_oracle)) {
      fixed_oracle_basis =
          subspace::public_data_oracle_basis(*opts.public_problem, theta, oracle, rng_oracle);
      have_fixed_oracle = true;
    }
    if (oracle.kind != subspace::OracleKind::Exact)
      grew += basis.absorb_columns(fixed_oracle_basis);

    detail::pad_square(s_small, grew);
    detail::pad_vector(theta_coords, grew);

    const VectorXd c = basis.coords(grad);
    s_small.noalias() += c * c.transpose();

    const detail::PreconditionerSpectrum spec = detail::analyze_s(s_small, opts.rank_tol);
    rec.trace_g = spec.trace_g;
    rec.trace_g_pinv = spec.trace_g_pinv;
    {
      double quad = 0.0;
      if (spec.w.size() > 0) {
        const VectorXd a = spec.w.transpose() * c;
        const double cutoff = opts.rank_tol * spec.op_g;
        for (int i = 0; i < a.size(); ++i)
          if (spec.lam_g[i] > cutoff) quad += a[i] * a[i] / spec.lam_g[i];
      }
      rec.grad_quad_pinv_g = quad;
    }

    // Oracle basis in reduced coordinates.
    MatrixXd u;
    if (oracle.kind == subspace::OracleKind::Exact) {
      const int k_eff = std::min(oracle.k, spec.span);
      u = spec.w.leftCols(k_eff);
    } else {
      u = linalg::detail::orthonormal_span(
          basis.q().transpose() * fixed_oracle_basis);
    }
    const int k_dim = static_cast<int>(u.cols());

    if (opts.true_subspace_basis != nullptr)
      rec.gamma_t = linalg::detail::projector_distance(*opts.true_subspace_basis,
                                                       basis.q() * u);

    // Preconditioner noise with the spectral-guard bookkeeping.
    rec.sigma_b = schedule.sigma_b(t);
    rec.sigma_B_requested = schedule.sigma_B(t);
    rec.sigma_guard_violation = rec.sigma_B_requested > 2.0 * spec.lam_min_pos_g;
    rec.sigma_B_effective = (schedule.spectral_guard && rec.sigma_guard_violation)
                                ? 2.0 * spec.lam_min_pos_g
                                : rec.sigma_B_requested;

    // H_t = Pi(G + B)Pi in oracle coordinates.
    MatrixXd h_v = MatrixXd::Zero(k_dim, k_dim);
    MatrixXd b_v = MatrixXd::Zero(k_dim, k_dim);
    if (k_dim > 0) {
      const MatrixXd a = spec.w.transpose() * u;
      h_v = a.transpose() * spec.lam_g.asDiagonal() * a;
      if (rec.sigma_B_effective > 0.0)
        b_v = rec.sigma_B_effective * linalg::goe_sample(k_dim, rng_goe).mat();
      h_v += b_v;
    }

    // The pinv rank cut is taken against the preconditioner scale, not
    // against H's own (possibly fully projected-out) norm; otherwise a
    // numerically-zero H would have its round-off spectrum inverted.
    VectorXd y_coords = theta_coords;
    int k_t = 0;
    if (k_dim > 0) {
      const double h_op = linalg::detail::operator_norm_dense(0.5 * (h_v + h_v.transpose()));
      if (h_op > opts.rank_tol * std::max(spec.op_g, 0.0)) {
        const double eff_tol = opts.rank_tol * std::max(1.0, spec.op_g / h_op);
        const linalg::PinvResult h_pinv =
            linalg::pinv_full(SymMatrix::symmetrized(h_v), eff_tol);
        k_t = h_pinv.rank;
        const VectorXd g_v = u.transpose() * c;
        const VectorXd noisy_v =
            g_v + sample_normal_vector(k_dim, rec.sigma_b, rng_grad_noise);
        y_coords.noalias() -= eta * (u * (h_pinv.matrix.mat() * noisy_v));
      }
    }
    rec.k_t = k_t;

    if (rec.k_t == 0 && rec.grad_norm > 1e-12)
      ++consecutive_degenerate;
    else
      consecutive_degenerate = 0;
    if (consecutive_degenerate > T / 2)
      throw DegenerateStep(
          "noisy_adagrad_run: pinv(H_t) vanished on a live gradient for more than T/2 steps");

    if (problem.constraint.is_ball()) {
      const MatrixXd h_r = u * h_v * u.transpose();
      linalg::SpectralDecomposition eig_h =
          linalg::detail::sym_eig(0.5 * (h_r + h_r.transpose()));
      eig_h.eigenvalues = eig_h.eigenvalues.cwiseMax(0.0);  // PSD part as the metric
      theta_coords = linalg::detail::seminorm_project_with_spectrum(
          y_coords, eig_h, problem.constraint, opts.rank_tol);
    } else {
      theta_coords = y_coords;
    }
    track_feasibility(metrics, problem, basis.lift(theta_coords));

    if (opts.ledger != nullptr) {
      privacy::LedgerEntry ge;
      ge.label = "gradient";
      ge.t = t;
      ge.sensitivity = privacy::gradient_sensitivity(problem.lipschitz_l, problem.n());
      ge.sigma = rec.sigma_b;
      ge.sigma_effective = rec.sigma_b;
      ge.floor = schedule.sigma_b_floor(t);
      opts.ledger->record(std::move(ge));

      privacy::LedgerEntry pe;
      pe.label = "preconditioner";
      pe.t = t;
      pe.sensitivity =
          privacy::preconditioner_sensitivity(problem.lipschitz_l, problem.n(), t);
      pe.sigma = rec.sigma_B_requested;
      pe.sigma_effective = rec.sigma_B_effective;
      pe.floor = schedule.sigma_B_floor(t);
      opts.ledger->record(std::move(pe));
    }

    if (opts.record_state) {
      PreconditionerState st;
      const MatrixXd q = basis.q();
      st.S = SymMatrix::symmetrized(q * s_small * q.transpose());
      st.G = SymMatrix::symmetrized(
          q * (spec.w * spec.lam_g.asDiagonal() * spec.w.transpose()) * q.transpose());
      st.B = SymMatrix::symmetrized(q * (u * b_v * u.transpose()) * q.transpose());
      st.H = SymMatrix::symmetrized(q * (u * h_v * u.transpose()) * q.transpose());
      st.k_t = rec.k_t;
      st.lambda_min_pos_g = spec.lam_min_pos_g;
      st.oracle_basis = q * u;
      metrics.state_trace.push_back(std::move(st));

      OptimizerState os;
      os.theta = metrics.iterates.back();
      os.step_t = t;
      os.pre_projection_iterate = basis.lift(y_coords);
      metrics.optimizer_trace.push_back(std::move(os));
    }

    if (t == T) metrics.intrinsic_dim = spec.op_g > 0.0 ? spec.trace_g / spec.op_g : 0.0;
    metrics.steps.push_back(std::move(rec));
  }

  finalize_metrics(metrics, problem, opts);
  return metrics;
}

// ---------------------------------------------------------------------------
// Vanilla full-matrix AdaGrad (H_t = delta*I + G_t)
// ---------------------------------------------------------------------------

RunMetrics adagrad_run(const problems::ErmProblem& problem, double eta, double delta_reg, int T,
                       Rng rng, const RunOptions& opts) {
  if (!(eta > 0.0)) throw InvalidParams("adagrad_run: eta must be positive");
  if (delta_reg < 0.0) throw InvalidParams("adagrad_run: delta_reg must be >= 0");
  if (T < 1) throw InvalidParams("adagrad_run: T must be >= 1");
  (void)rng;  // the vanilla algorithm is deterministic

  const int p = problem.p();
  detail::RunningBasis basis(p);
  MatrixXd s_small(0, 0);
  VectorXd theta_coords(0);

  RunMetrics metrics;
  metrics.eta = eta;
  metrics.steps.reserve(T);
  metrics.iterates.reserve(T);

  for (int t = 1; t <= T; ++t) {
    const VectorXd theta = basis.lift(theta_coords);
    metrics.iterates.push_back(theta);
    track_feasibility(metrics, problem, theta);

    StepRecord rec;
    rec.t = t;
    rec.envelope = problem.lipschitz_l;
    const VectorXd grad =
        problems::batch_gradient(problem, theta, problem.lipschitz_l, &rec.max_example_grad);
    rec.loss = problems::batch_loss(problem, theta);
    rec.grad_norm = grad.norm();
    if (opts.keep_gradients) metrics.gradient_history.push_back(grad);

    const int grew = basis.absorb(grad);
    detail::pad_square(s_small, grew);
    detail::pad_vector(theta_coords, grew);

    const VectorXd c = basis.coords(grad);
    s_small.noalias() += c * c.transpose();

    const detail::PreconditionerSpectrum spec = detail::analyze_s(s_small, opts.rank_tol);
    rec.trace_g = spec.trace_g;
    rec.trace_g_pinv = spec.trace_g_pinv;
    {
      double quad = 0.0;
      if (spec.w.size() > 0) {
        const VectorXd a = spec.w.transpose() * c;
        const double cutoff = opts.rank_tol * spec.op_g;
        for (int i = 0; i < a.size(); ++i)
          if (spec.lam_g[i] > cutoff) quad += a[i] * a[i] / spec.lam_g[i];
      }
      rec.grad_quad_pinv_g = quad;
    }

    // H = delta*I + G on the span; pseudo-inverted with the shared rank cut.
    const int r = static_cast<int>(s_small.rows());
    VectorXd h_vals = spec.lam_g.array() + delta_reg;
    VectorXd h_inv = VectorXd::Zero(r);
    int k_t = 0;
    const double h_max = r > 0 ? h_vals.maxCoeff() : 0.0;
    for (int i = 0; i < r; ++i) {
      if (h_vals[i] > opts.rank_tol * h_max) {
        h_inv[i] = 1.0 / h_vals[i];
        ++k_t;
      }
    }
    rec.k_t = k_t;

    VectorXd y_coords = theta_coords;
    if (r > 0) {
      const VectorXd a = spec.w.transpose() * c;
      y_coords.noalias() -= eta * (spec.w * (h_inv.asDiagonal() * a));
    }

    if (problem.constraint.is_ball() && r > 0) {
      linalg::SpectralDecomposition eig_h;
      eig_h.eigenvalues = h_vals;
      eig_h.eigenvectors = spec.w;
      theta_coords = linalg::detail::seminorm_project_with_spectrum(
          y_coords, eig_h, problem.constraint, opts.rank_tol);
    } else if (problem.constraint.is_ball()) {
      theta_coords = y_coords;  // zero-dim span: nothing moved
    } else {
      theta_coords = y_coords;
    }
    track_feasibility(metrics, problem, basis.lift(theta_coords));

    if (opts.record_state) {
      PreconditionerState st;
      const MatrixXd q = basis.q();
      const MatrixXd g_dense =
          q * (spec.w * spec.lam_g.asDiagonal() * spec.w.transpose()) * q.transpose();
      st.S = SymMatrix::symmetrized(q * s_small * q.transpose());
      st.G = SymMatrix::symmetrized(g_dense);
      st.B = SymMatrix::zero(p);
      st.H = SymMatrix::symmetrized(g_dense +
                                    delta_reg * MatrixXd::Identity(p, p));
      st.k_t = rec.k_t;
      st.lambda_min_pos_g = spec.lam_min_pos_g;
      st.oracle_basis = MatrixXd(p, 0);
      metrics.state_trace.push_back(std::move(st));

      OptimizerState os;
      os.theta = metrics.iterates.back();
      os.step_t = t;
      os.pre_projection_iterate = basis.lift(y_coords);
      metrics.optimizer_trace.push_back(std::move(os));
    }

    if (t == T) metrics.intrinsic_dim = spec.op_g > 0.0 ? spec.trace_g / spec.op_g : 0.0;
    metrics.steps.push_back(std::move(rec));
  }

  finalize_metrics(metrics, problem, opts);
  return metrics;
}

// ---------------------------------------------------------------------------
// DP-GD (unconstrained) and the projected noisy-GD baseline
// ---------------------------------------------------------------------------

namespace {

RunMetrics noisy_gd_core(const problems::ErmProblem& problem, double sigma, double eta, int T,
                         Rng& rng, const RunOptions& opts, bool allow_constraint) {
  if (!(eta > 0.0)) throw InvalidParams("gd run: eta must be positive");
  if (sigma < 0.0) throw InvalidParams("gd run: sigma must be >= 0");
  if (T < 1) throw InvalidParams("gd run: T must be >= 1");
  if (!allow_constraint && problem.constraint.is_ball())
    throw InvalidParams("dp_gd_run: constraint set must be unconstrained");

  const int p = problem.p();
  Rng rng_noise = rng.fork("gradient-noise");

  RunMetrics metrics;
  metrics.eta = eta;
  metrics.steps.reserve(T);
  metrics.iterates.reserve(T);

  VectorXd theta = VectorXd::Zero(p);
  for (int t = 1; t <= T; ++t) {
    metrics.iterates.push_back(theta);
    track_feasibility(metrics, problem, theta);

    StepRecord rec;
    rec.t = t;
    rec.envelope = problem.lipschitz_l;
    rec.sigma_b = sigma;
    const VectorXd grad =
        problems::batch_gradient(problem, theta, problem.lipschitz_l, &rec.max_example_grad);
    rec.loss = problems::batch_loss(problem, theta);
    rec.grad_norm = grad.norm();
    if (opts.keep_gradients) metrics.gradient_history.push_back(grad);

    theta -= eta * (grad + sample_normal_vector(p, sigma, rng_noise));
    if (problem.constraint.is_ball()) {
      const double norm = theta.norm();
      if (norm > problem.constraint.radius) theta *= problem.constraint.radius / norm;
    }
    track_feasibility(metrics, problem, theta);

    if (opts.ledger != nullptr) {
      privacy::LedgerEntry ge;
      ge.label = "gradient";
      ge.t = t;
      ge.sensitivity = privacy::gradient_sensitivity(problem.lipschitz_l, problem.n());
      ge.sigma = sigma;
      ge.sigma_effective = sigma;
      ge.floor = opts.sigma_floor;
      opts.ledger->record(std::move(ge));
    }
    metrics.steps.push_back(std::move(rec));
  }

  finalize_metrics(metrics, problem, opts);
  fill_m_projection_stats(metrics, problem);
  return metrics;
}

}  // namespace

RunMetrics dp_gd_run(const problems::ErmProblem& problem, double sigma, double eta, int T, Rng rng,
                     const RunOptions& opts) {
  return noisy_gd_core(problem, sigma, eta, T, rng, opts, /*allow_constraint=*/false);
}

RunMetrics noisy_gd_run(const problems::ErmProblem& problem, double sigma, double eta, int T,
                        Rng rng, const RunOptions& opts) {
  return noisy_gd_core(problem, sigma, eta, T, rng, opts, /*allow_constraint=*/true);
}

// ---------------------------------------------------------------------------
// Meters
// ---------------------------------------------------------------------------

VectorXd online_to_batch(const std::vector<VectorXd>& iterate_history) {
  if (iterate_history.empty()) throw EmptyHistory("online_to_batch: empty iterate history");
  VectorXd mean = VectorXd::Zero(iterate_history.front().size());
  for (const VectorXd& v : iterate_history) {
    if (v.size() != mean.size()) throw DimensionMismatch("online_to_batch: ragged history");
    mean += v;
  }
  return mean / static_cast<double>(iterate_history.size());
}

double measure_regret(const problems::ErmProblem& problem,
                      const std::vector<VectorXd>& iterate_history, const VectorXd& theta_star) {
  if (iterate_history.empty()) throw EmptyHistory("measure_regret: empty iterate history");
  double sum = 0.0;
  for (const VectorXd& theta : iterate_history) sum += problems::batch_loss(problem, theta);
  return sum / static_cast<double>(iterate_history.size()) -
         problems::batch_loss(problem, theta_star);
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& series) {
  if (series.size() < 4) throw InvalidParams("rate_fit: need at least 4 points");
  const int n = static_cast<int>(series.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [t, v] : series) {
    if (!(t > 0.0)) throw NonPositiveValue("rate_fit: horizon values must be positive");
    if (!(v > 0.0)) throw NonPositiveValue("rate_fit: series values must be positive");
    sx += std::log(t);
    sy += std::log(v);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [t, v] : series) {
    const double dx = std::log(t) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(v) - my);
  }
  if (sxx == 0.0) throw InvalidParams("rate_fit: degenerate horizon values");

  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& [t, v] : series) {
    const double pred = fit.intercept + fit.slope * std::log(t);
    const double resid = std::log(v) - pred;
    ss_res += resid * resid;
    ss_tot += (std::log(v) - my) * (std::log(v) - my);
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(resid));
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace dp::opt
