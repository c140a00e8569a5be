#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dp/common.hpp"
#include "dp/linalg.hpp"
#include "dp/problems.hpp"

namespace dp::subspace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// SubspaceEstimate: true vs oracle projector and the mismatch
// gamma = |V V^T - Vtilde Vtilde^T|_op (sine of the largest principal angle).
// ---------------------------------------------------------------------------
struct SubspaceEstimate {
  linalg::OrthoProjector true_projector;
  linalg::OrthoProjector oracle_projector;
  double gamma = 0.0;

  static SubspaceEstimate make(linalg::OrthoProjector truth, linalg::OrthoProjector oracle);
};

double projector_mismatch(const linalg::OrthoProjector& a, const linalg::OrthoProjector& b);

// ---------------------------------------------------------------------------
// OracleConfig
// ---------------------------------------------------------------------------
enum class OracleKind { Exact, PublicData, Corrupted };
enum class OracleRefresh { PerStep, Initial };

std::string oracle_kind_name(OracleKind k);
OracleKind oracle_kind_from_name(const std::string& name);

struct OracleConfig {
  OracleKind kind = OracleKind::Exact;
  int k = 1;                    // target rank
  int public_m = 0;             // sample count for PublicData
  double corruption_angle = 0;  // radians, for Corrupted
  OracleRefresh refresh = OracleRefresh::PerStep;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

// Projector onto the top-k left-singular subspace of the stacked gradient
// history; rank falls back to the span dimension when the history spans
// fewer than k directions. Span detection uses a permissive singular-value
// cutoff (1e-12 relative) so downstream pinv rank tolerances govern.
linalg::OrthoProjector exact_oracle(const std::vector<VectorXd>& gradient_history, int k);

// Top-k projector of the empirical second-moment matrix of per-example
// gradients on cfg.public_m records of the public split, evaluated at theta.
linalg::OrthoProjector public_data_oracle(const problems::ErmProblem& public_split,
                                          const VectorXd& theta, const OracleConfig& cfg,
                                          Rng& rng);

// Rotates the true basis by `angle` in a random 2-plane straddling the
// subspace and its complement; the resulting mismatch equals sin(angle).
linalg::OrthoProjector corrupted_oracle(const linalg::OrthoProjector& true_projector, double angle,
                                        Rng& rng);

// |A - B|_op / (lambda_i(A) - lambda_j(B)), 1-indexed eigenvalues sorted
// descending. Throws GapViolation when lambda_i(A) <= lambda_j(B).
double davis_kahan_bound(const linalg::SymMatrix& a, const linalg::SymMatrix& b, int i, int j);

// ---------------------------------------------------------------------------
// Basis-level variants used by the optimizer hot loop.
// ---------------------------------------------------------------------------

MatrixXd exact_oracle_basis(const std::vector<VectorXd>& gradient_history, int k);
MatrixXd public_data_oracle_basis(const problems::ErmProblem& public_split, const VectorXd& theta,
                                  const OracleConfig& cfg, Rng& rng);
MatrixXd corrupted_oracle_basis(const MatrixXd& true_basis, double angle, Rng& rng);

// ---------------------------------------------------------------------------
// Projector JSON serialization: {dim, rank, basis (row-major p x rank)}.
// ---------------------------------------------------------------------------
std::string projector_to_json(const linalg::OrthoProjector& proj);
linalg::OrthoProjector projector_from_json(const std::string& text);

}  // namespace dp::subspace
