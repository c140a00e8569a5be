#include "dp/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dp/linalg.hpp"
#include "dp/optimizers.hpp"
#include "dp/privacy.hpp"
#include "dp/problems.hpp"
#include "dp/subspace.hpp"

namespace dp::verify {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using linalg::SymMatrix;

namespace {

class SuiteTimer {
 public:
  explicit SuiteTimer(SuiteResult& result)
      : result_(result), start_(std::chrono::steady_clock::now()) {}
  ~SuiteTimer() {
    result_.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  SuiteResult& result_;
  std::chrono::steady_clock::time_point start_;
};

void finish(SuiteResult& r) { r.pass = r.failures == 0 && r.checked > 0; }

void add_counterexample(SuiteResult& r, const std::string& text) {
  if (r.counterexamples.size() < 5) r.counterexamples.push_back(text);
}

MatrixXd random_gaussian(int rows, int cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

SymMatrix random_symmetric(int dim, Rng& rng) { return linalg::goe_sample(dim, rng); }

SymMatrix random_psd_with_rank(int dim, int rank, Rng& rng) {
  const MatrixXd x = random_gaussian(dim, rank, rng);
  return SymMatrix::symmetrized(x * x.transpose());
}

// Orthonormal basis of the image (|lambda| above rel tol) of a symmetric matrix.
MatrixXd image_basis(const linalg::SpectralDecomposition& eig, double rel_tol) {
  const double cutoff = rel_tol * eig.max_abs_eigenvalue();
  std::vector<int> keep;
  for (int i = 0; i < eig.dim(); ++i)
    if (std::abs(eig.eigenvalues[i]) > cutoff) keep.push_back(i);
  MatrixXd basis(eig.eigenvectors.rows(), static_cast<int>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) basis.col(j) = eig.eigenvectors.col(keep[j]);
  return basis;
}

double spectral_norm_general(const MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return std::sqrt(
      std::max(0.0, linalg::detail::operator_norm_dense(MatrixXd(m.transpose() * m))));
}

}  // namespace

// ---------------------------------------------------------------------------
// 1. h-inverse: quadratic-form comparability of pinv(A+B) with pinv(A) on the
// image intersection. Instances violating 2|B|_op <= lambda_min>0(A), with a
// trivial image intersection, or whose nonzero (A+B)-spectrum dips below the
// Weyl floor lambda_min>0(A) - |B|_op (the quantitative face of the
// invertibility hypothesis) are precondition-filtered.
// ---------------------------------------------------------------------------

SuiteResult verify_h_inverse(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "h-inverse";
  r.requested = trials;
  r.statistic_name = "max_ratio_vs_bound";
  SuiteTimer timer(r);

  for (int i = 0; i < trials; ++i) {
    Rng rng = Rng(seed).fork("h-inverse", static_cast<std::uint64_t>(i));
    const int d = rng.uniform_int(2, 10);
    const int rank = rng.uniform() < 0.3 ? rng.uniform_int(1, d) : d;
    const SymMatrix a = random_psd_with_rank(d, rank, rng);
    const linalg::SpectralDecomposition eig_a = linalg::spectral(a);
    const double lam_min_pos = linalg::lambda_min_pos(eig_a);
    if (lam_min_pos <= 0.0) {
      ++r.skipped;
      continue;
    }

    const double beta = rng.uniform(0.2, 1.15);
    SymMatrix b = random_symmetric(d, rng);
    const double b_norm0 = linalg::operator_norm(b);
    if (b_norm0 == 0.0) {
      ++r.skipped;
      continue;
    }
    b = b.scaled(beta * lam_min_pos / (2.0 * b_norm0));
    const double b_norm = linalg::operator_norm(b);

    if (2.0 * b_norm > lam_min_pos) {  // precondition filter
      ++r.skipped;
      continue;
    }

    const SymMatrix c = a + b;
    const linalg::SpectralDecomposition eig_c = linalg::spectral(c);

    // Quantitative invertibility: nonzero C-spectrum above the Weyl floor.
    const double c_cutoff = linalg::kDefaultRankTol * eig_c.max_abs_eigenvalue();
    double min_nonzero_c = std::numeric_limits<double>::infinity();
    for (int j = 0; j < eig_c.dim(); ++j) {
      const double abs_lam = std::abs(eig_c.eigenvalues[j]);
      if (abs_lam > c_cutoff) min_nonzero_c = std::min(min_nonzero_c, abs_lam);
    }
    if (!(min_nonzero_c >= (lam_min_pos - b_norm) * (1.0 - 1e-6))) {
      ++r.skipped;
      continue;
    }

    // Image intersection via the eigenvalue-2 space of P_A + P_C.
    const MatrixXd ba = image_basis(eig_a, linalg::kDefaultRankTol);
    const MatrixXd bc = image_basis(eig_c, linalg::kDefaultRankTol);
    const MatrixXd sum_proj = ba * ba.transpose() + bc * bc.transpose();
    const linalg::SpectralDecomposition eig_p = linalg::detail::sym_eig(sum_proj);
    std::vector<int> two;
    for (int j = 0; j < eig_p.dim(); ++j)
      if (eig_p.eigenvalues[j] > 2.0 - 1e-8) two.push_back(j);
    if (two.empty()) {
      ++r.skipped;
      continue;
    }

    VectorXd v = VectorXd::Zero(d);
    for (int idx : two) v += rng.normal() * eig_p.eigenvectors.col(idx);
    if (v.norm() == 0.0) {
      ++r.skipped;
      continue;
    }
    v.normalize();

    const double lhs = std::abs(v.dot(linalg::pinv(c).apply(v)));
    const double base = std::abs(v.dot(linalg::pinv(a).apply(v)));
    const double constant = (4.0 * b_norm <= lam_min_pos) ? 4.0 / 3.0 : 2.0;
    const double bound = constant * base + 1e-9;

    ++r.checked;
    r.statistic = std::max(r.statistic, lhs / bound);
    if (lhs > bound) {
      ++r.failures;
      std::ostringstream msg;
      msg << "d=" << d << " rank=" << rank << " beta=" << beta << " lhs=" << lhs
          << " bound=" << bound;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// 2. Davis-Kahan: |P_A^i (I - P_B^{j-1})|_op <= |A-B|_op / (lambda_i(A) - lambda_j(B))
// ---------------------------------------------------------------------------

SuiteResult verify_davis_kahan(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "davis-kahan";
  r.requested = trials;
  r.statistic_name = "max_lhs_over_bound";
  SuiteTimer timer(r);

  for (int i = 0; i < trials; ++i) {
    Rng rng = Rng(seed).fork("davis-kahan", static_cast<std::uint64_t>(i));
    const int d = rng.uniform_int(2, 12);
    const SymMatrix a = random_symmetric(d, rng);
    const SymMatrix b = random_symmetric(d, rng);
    const linalg::SpectralDecomposition ea = linalg::spectral(a);
    const linalg::SpectralDecomposition eb = linalg::spectral(b);

    const double scale = std::max({ea.max_abs_eigenvalue(), eb.max_abs_eigenvalue(), 1.0});
    std::vector<std::pair<int, int>> valid;
    for (int ii = 1; ii <= d; ++ii)
      for (int jj = 1; jj <= d; ++jj)
        if (ea.eigenvalues[ii - 1] - eb.eigenvalues[jj - 1] > 0.05 * scale)
          valid.emplace_back(ii, jj);
    if (valid.empty()) {
      ++r.skipped;
      continue;
    }
    const auto [ii, jj] = valid[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(valid.size()) - 1))];

    const double bound = subspace::davis_kahan_bound(a, b, ii, jj);

    const MatrixXd pa = ea.eigenvectors.leftCols(ii) * ea.eigenvectors.leftCols(ii).transpose();
    MatrixXd complement = MatrixXd::Identity(d, d);
    if (jj > 1)
      complement -=
          eb.eigenvectors.leftCols(jj - 1) * eb.eigenvectors.leftCols(jj - 1).transpose();
    const double lhs = spectral_norm_general(pa * complement);

    ++r.checked;
    r.statistic = std::max(r.statistic, lhs / (bound + 1e-9));
    if (lhs > bound + 1e-9) {
      ++r.failures;
      std::ostringstream msg;
      msg << "d=" << d << " i=" << ii << " j=" << jj << " lhs=" << lhs << " bound=" << bound;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// 3. Projection contraction: |P_C^H(x) - v|_H <= |x - v|_H for v in C.
// ---------------------------------------------------------------------------

SuiteResult verify_projection_contraction(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "projection-contraction";
  r.requested = trials;
  r.statistic_name = "max_excess";
  SuiteTimer timer(r);

  for (int i = 0; i < trials; ++i) {
    Rng rng = Rng(seed).fork("projection-contraction", static_cast<std::uint64_t>(i));
    const int d = rng.uniform_int(1, 8);

    SymMatrix h = SymMatrix::zero(d);
    const double h_mode = rng.uniform();
    if (h_mode > 0.1) {
      const int rank = h_mode > 0.5 ? d : rng.uniform_int(1, d);
      h = random_psd_with_rank(d, rank, rng);
    }

    ConstraintSet c = ConstraintSet::unconstrained();
    if (rng.uniform() > 0.1) c = ConstraintSet::ball(rng.uniform(0.2, 3.0));

    const double reach = c.is_ball() ? c.radius : 1.0;
    VectorXd x(d), vdir(d);
    for (int j = 0; j < d; ++j) {
      x[j] = rng.normal();
      vdir[j] = rng.normal();
    }
    x *= rng.uniform(0.0, 2.0) * reach / std::max(x.norm(), 1e-12);
    VectorXd v = vdir * (c.is_ball() ? rng.uniform(0.0, 1.0) * c.radius : rng.uniform(0.0, 2.0)) /
                 std::max(vdir.norm(), 1e-12);

    const VectorXd projected = linalg::seminorm_project(x, h, c);
    const double lhs = linalg::mahalanobis_norm(projected - v, h);
    const double rhs = linalg::mahalanobis_norm(x - v, h);

    ++r.checked;
    r.statistic = std::max(r.statistic, lhs - rhs);
    if (lhs > rhs + 1e-9) {
      ++r.failures;
      std::ostringstream msg;
      msg << "d=" << d << " lhs=" << lhs << " rhs=" << rhs;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// 4. Trace lemma: sum_t grad^T G_t^+ grad <= 2 Tr(G_T) along AdaGrad runs.
// ---------------------------------------------------------------------------

SuiteResult verify_trace_lemma(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "trace-lemma";
  r.requested = trials;
  r.statistic_name = "max_lhs_over_2trace";
  SuiteTimer timer(r);

  const int runs = std::max(2, trials / 100);
  for (int i = 0; i < runs; ++i) {
    Rng rng = Rng(seed).fork("trace-lemma", static_cast<std::uint64_t>(i));
    problems::LowRankSpec spec{8, 3, seed + static_cast<std::uint64_t>(i)};
    auto [problem, projector] =
        problems::generate_low_rank_glm(spec, 30, problems::LossKind::LogisticRegression, rng);

    opt::RunOptions opts;
    opts.reference_budget = 50;  // the reference is irrelevant to this suite
    const opt::RunMetrics metrics =
        opt::adagrad_run(problem, 0.5, 0.0, 60, rng.fork("run"), opts);

    double lhs = 0.0;
    for (const opt::StepRecord& s : metrics.steps) lhs += s.grad_quad_pinv_g;
    const double rhs = 2.0 * metrics.trace_g_final + 1e-8;

    ++r.checked;
    r.statistic = std::max(r.statistic, lhs / rhs);
    if (lhs > rhs) {
      ++r.failures;
      std::ostringstream msg;
      msg << "run=" << i << " lhs=" << lhs << " 2trace=" << rhs;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// 5. Sum inequality: sum a_i / sqrt(prefix_i) <= 2 sqrt(sum a_i).
// ---------------------------------------------------------------------------

SuiteResult verify_sum_inequality(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "sum-inequality";
  r.requested = trials;
  r.statistic_name = "max_lhs_over_rhs";
  SuiteTimer timer(r);

  for (int i = 0; i < trials; ++i) {
    Rng rng = Rng(seed).fork("sum-inequality", static_cast<std::uint64_t>(i));
    const int m = rng.uniform_int(1, 200);
    const bool heavy = rng.uniform() < 0.3;
    std::vector<double> a(static_cast<std::size_t>(m));
    for (double& x : a) {
      if (rng.uniform() < 0.15) {
        x = 0.0;
      } else {
        const double u = rng.uniform();
        x = heavy ? std::pow(u, -0.45) - 1.0 : u;
      }
    }

    double prefix = 0.0, lhs = 0.0, total = 0.0;
    for (double x : a) {
      prefix += x;
      total += x;
      if (prefix > 0.0) lhs += x / std::sqrt(prefix);
    }
    const double rhs = 2.0 * std::sqrt(total);

    ++r.checked;
    if (rhs > 0.0) r.statistic = std::max(r.statistic, lhs / rhs);
    if (lhs > rhs + 1e-12) {
      ++r.failures;
      std::ostringstream msg;
      msg << "m=" << m << " lhs=" << lhs << " rhs=" << rhs;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// 6. GOE operator-norm concentration: median |B|_op / sqrt(p) < 2.2 for
// p in {10, 50, 200}.
// ---------------------------------------------------------------------------

SuiteResult verify_goe_operator_norm(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "goe-operator-norm";
  r.requested = trials;
  r.statistic_name = "max_median_ratio";
  SuiteTimer timer(r);

  const int samples = std::clamp(trials / 5, 50, 200);
  for (int p : {10, 50, 200}) {
    std::vector<double> ratios;
    ratios.reserve(samples);
    for (int s = 0; s < samples; ++s) {
      Rng rng = Rng(seed).fork("goe-norm", static_cast<std::uint64_t>(p * 100000 + s));
      const SymMatrix b = linalg::goe_sample(p, rng);
      ratios.push_back(linalg::operator_norm(b) / std::sqrt(static_cast<double>(p)));
    }
    std::nth_element(ratios.begin(), ratios.begin() + samples / 2, ratios.end());
    const double median = ratios[static_cast<std::size_t>(samples / 2)];

    ++r.checked;
    r.statistic = std::max(r.statistic, median);
    if (!(median < 2.2)) {
      ++r.failures;
      std::ostringstream msg;
      msg << "p=" << p << " median=" << median;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// 7. Preconditioner sensitivity: |G_t^D - G_t^D'|_F <= L sqrt(t)/n over
// neighboring pairs with shared iterates (fixed 1/n weights, matching the
// lemma's quantity).
// ---------------------------------------------------------------------------

SuiteResult verify_preconditioner_sensitivity(std::uint64_t seed, int trials) {
  SuiteResult r;
  r.name = "preconditioner-sensitivity";
  r.requested = trials;
  r.statistic_name = "max_ratio";
  SuiteTimer timer(r);

  const int pairs = std::clamp(trials / 20, 5, 50);
  const int p = 20, k = 5, n = 100, t_max = 100;

  Rng rng = Rng(seed).fork("precond-sensitivity");
  problems::LowRankSpec spec{p, k, seed};
  auto [problem, projector] =
      problems::generate_low_rank_glm(spec, n, problems::LossKind::LogisticRegression, rng);
  const double lipschitz = problem.lipschitz_l;

  opt::RunOptions run_opts;
  run_opts.reference_budget = 50;
  const opt::RunMetrics trajectory =
      opt::adagrad_run(problem, 0.5, 0.0, t_max, rng.fork("trajectory"), run_opts);

  // Shared-iterate gradients for the base dataset.
  std::vector<VectorXd> base_grads(t_max);
  for (int t = 0; t < t_max; ++t)
    base_grads[t] = problems::batch_gradient(problem, trajectory.iterates[t]);

  for (int pair = 0; pair < pairs; ++pair) {
    Rng pair_rng = rng.fork("pair", static_cast<std::uint64_t>(pair));
    const int removed = pair_rng.uniform_int(0, n - 1);

    MatrixXd s_base = MatrixXd::Zero(p, p);
    MatrixXd s_neighbor = MatrixXd::Zero(p, p);
    double worst = 0.0;
    for (int t = 0; t < t_max; ++t) {
      const VectorXd& g = base_grads[t];
      const VectorXd g2 =
          problems::batch_gradient_excluding(problem, trajectory.iterates[t], removed);
      s_base.noalias() += g * g.transpose();
      s_neighbor.noalias() += g2 * g2.transpose();
      const SymMatrix g_base = linalg::psd_sqrt(SymMatrix::symmetrized(s_base));
      const SymMatrix g_neigh = linalg::psd_sqrt(SymMatrix::symmetrized(s_neighbor));
      const double diff = (g_base - g_neigh).frobenius();
      const double formula =
          privacy::preconditioner_sensitivity(lipschitz, n, t + 1);
      worst = std::max(worst, diff / formula);
    }

    ++r.checked;
    r.statistic = std::max(r.statistic, worst);
    if (worst > 1.0 + 1e-6) {
      ++r.failures;
      std::ostringstream msg;
      msg << "pair=" << pair << " removed=" << removed << " max_ratio=" << worst;
      add_counterexample(r, msg.str());
    }
  }
  finish(r);
  return r;
}

// ---------------------------------------------------------------------------
// Aggregate
// ---------------------------------------------------------------------------

VerifyReport verify_all(std::uint64_t seed, int trials) {
  if (trials < 1) throw InvalidParams("verify: trials must be >= 1");
  VerifyReport report;
  report.seed = seed;
  report.trials = trials;
  report.suites.push_back(verify_h_inverse(seed, trials));
  report.suites.push_back(verify_davis_kahan(seed, trials));
  report.suites.push_back(verify_projection_contraction(seed, trials));
  report.suites.push_back(verify_trace_lemma(seed, trials));
  report.suites.push_back(verify_sum_inequality(seed, trials));
  report.suites.push_back(verify_goe_operator_norm(seed, trials));
  report.suites.push_back(verify_preconditioner_sensitivity(seed, trials));
  report.all_pass = true;
  for (const SuiteResult& s : report.suites) report.all_pass = report.all_pass && s.pass;
  return report;
}

std::string report_to_json(const VerifyReport& report) {
  nlohmann::json j;
  j["seed"] = report.seed;
  j["trials"] = report.trials;
  j["all_pass"] = report.all_pass;
  j["suites"] = nlohmann::json::array();
  for (const SuiteResult& s : report.suites) {
    nlohmann::json js{{"name", s.name},
                      {"requested", s.requested},
                      {"checked", s.checked},
                      {"skipped", s.skipped},
                      {"failures", s.failures},
                      {"statistic", s.statistic},
                      {"statistic_name", s.statistic_name},
                      {"pass", s.pass},
                      {"elapsed_seconds", s.elapsed_seconds},
                      {"counterexamples", s.counterexamples}};
    j["suites"].push_back(std::move(js));
  }
  return j.dump(2);
}

void print_report(const VerifyReport& report, std::ostream& os) {
  for (const SuiteResult& s : report.suites) {
    os << (s.pass ? "[PASS] " : "[FAIL] ") << std::left << std::setw(28) << s.name
       << " checked=" << s.checked << " skipped=" << s.skipped << " failures=" << s.failures
       << " " << s.statistic_name << "=" << std::setprecision(4) << s.statistic
       << std::setprecision(6) << " (" << std::fixed << std::setprecision(2)
       << s.elapsed_seconds << "s)" << std::defaultfloat << '\n';
    for (const std::string& ce : s.counterexamples) os << "    counterexample: " << ce << '\n';
  }
  os << (report.all_pass ? "RESULT: PASS" : "RESULT: FAIL") << " (" << report.suites.size()
     << " suites)\n";
}

}  // namespace dp::verify
