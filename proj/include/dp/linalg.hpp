#pragma once

#include <Eigen/Dense>

#include "dp/common.hpp"
#include "dp/constraint.hpp"

namespace dp::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Relative eigenvalue cutoff shared by pinv and rank detection. Exposed
// because rank detection interacts with the optimizers' k_t estimation.
inline constexpr double kDefaultRankTol = 1e-10;

// Relative tolerance below which negative eigenvalues are treated as
// round-off and clamped to zero.
inline constexpr double kPsdTol = 1e-10;

// ---------------------------------------------------------------------------
// SymMatrix: dense symmetric real matrix. Symmetry is exact by construction
// (the upper triangle is mirrored into the lower one).
// ---------------------------------------------------------------------------
class SymMatrix {
 public:
  SymMatrix() = default;

  // Checks near-symmetry (relative 1e-8) and then enforces it exactly.
  explicit SymMatrix(const MatrixXd& m);

  static SymMatrix zero(int dim);
  static SymMatrix identity(int dim);
  static SymMatrix diagonal(const VectorXd& d);
  // Trusted path for products of the form V D V^T: symmetrizes exactly
  // without the near-symmetry check.
  static SymMatrix symmetrized(MatrixXd m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace(); }
  double frobenius() const { return m_.norm(); }

  VectorXd apply(const VectorXd& x) const;

  SymMatrix operator+(const SymMatrix& other) const;
  SymMatrix operator-(const SymMatrix& other) const;
  SymMatrix scaled(double s) const;

 private:
  MatrixXd m_;
};

// ---------------------------------------------------------------------------
// SpectralDecomposition: eigenvalues sorted descending with matching
// orthonormal eigenvector columns.
// ---------------------------------------------------------------------------
struct SpectralDecomposition {
  VectorXd eigenvalues;
  MatrixXd eigenvectors;

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  double max_abs_eigenvalue() const;
};

SpectralDecomposition spectral(const SymMatrix& a);

// Smallest eigenvalue strictly above rel_tol * |lambda|_max; 0 if none.
double lambda_min_pos(const SpectralDecomposition& s, double rel_tol = kDefaultRankTol);

// ---------------------------------------------------------------------------
// OrthoProjector: idempotent symmetric matrix P = V V^T with an explicit
// orthonormal basis of its range.
// ---------------------------------------------------------------------------
class OrthoProjector {
 public:
  OrthoProjector() = default;

  // basis: p x k with orthonormal columns (validated to 1e-8).
  static OrthoProjector from_basis(const MatrixXd& basis);
  static OrthoProjector identity(int dim);
  static OrthoProjector zero(int dim);
  // Recovers the basis from the matrix spectrum (eigenvalues near 1).
  static OrthoProjector from_matrix(const SymMatrix& m);

  int dim() const { return matrix_.dim(); }
  int rank() const { return rank_; }
  const SymMatrix& matrix() const { return matrix_; }
  const MatrixXd& basis() const { return basis_; }

  VectorXd apply(const VectorXd& x) const { return matrix_.apply(x); }

 private:
  SymMatrix matrix_;
  MatrixXd basis_;
  int rank_ = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// PSD square root via eigendecomposition; eigenvalues in
// [-kPsdTol*|A|_op, 0) are clamped to zero, anything lower is NotPsd.
SymMatrix psd_sqrt(const SymMatrix& a);

struct PinvResult {
  SymMatrix matrix;
  int rank = 0;
};

// Moore-Penrose pseudoinverse of a symmetric matrix: eigenvalues with
// |lambda| > rank_tol * |A|_op are inverted, the rest zeroed.
PinvResult pinv_full(const SymMatrix& a, double rank_tol = kDefaultRankTol);
SymMatrix pinv(const SymMatrix& a, double rank_tol = kDefaultRankTol);

// Symmetric random matrix with N(0,1) strictly-upper entries and N(0,2)
// diagonal entries; deterministic given the rng state.
SymMatrix goe_sample(int dim, Rng& rng);

// max_i |lambda_i(A)|
double operator_norm(const SymMatrix& a);

// Projector onto the span of the k largest-eigenvalue eigenvectors.
// Throws DegenerateSpectrum when lambda_k - lambda_{k+1} <= 1e-12*|A|_op.
OrthoProjector top_k_projector(const SymMatrix& a, int k);

// argmin_{theta in C} |theta - y|_H for PSD H. For rank-deficient H the
// minimizer set is nontrivial: the range component is the unique constrained
// minimizer, the kernel component of y is kept, shrunk toward the origin
// only as far as feasibility requires.
VectorXd seminorm_project(const VectorXd& y, const SymMatrix& h, const ConstraintSet& c,
                          double rank_tol = kDefaultRankTol);

// sqrt(x^T A x), clamping round-off negatives to zero.
double mahalanobis_norm(const VectorXd& x, const SymMatrix& a);

// ---------------------------------------------------------------------------
// Raw-matrix helpers shared with the optimizer hot loop (same numerics as
// the SymMatrix operations above).
// ---------------------------------------------------------------------------
namespace detail {

// Eigendecomposition of an (assumed symmetric) dense matrix, descending.
SpectralDecomposition sym_eig(const MatrixXd& a);

double operator_norm_dense(const MatrixXd& sym);

// Core of seminorm_project, acting on the spectral data of H.
VectorXd seminorm_project_with_spectrum(const VectorXd& y, const SpectralDecomposition& h,
                                        const ConstraintSet& c, double rank_tol);

// Solves min sum_i lambda_i (z_i - c_i)^2 s.t. |z| <= r (lambda_i > 0,
// |c| > r) by a safeguarded Newton iteration on the Lagrange multiplier.
VectorXd ball_secular_solve(const VectorXd& lambda, const VectorXd& c, double radius);

// |P_A - P_B|_op from orthonormal bases (works on the joint span, so the
// cost is governed by the two ranks rather than the ambient dimension).
double projector_distance(const MatrixXd& basis_a, const MatrixXd& basis_b);

// Orthonormal basis of the column span of m (columns with relative
// residual above tol).
MatrixXd orthonormal_span(const MatrixXd& m, double tol = 1e-12);

}  // namespace detail

}  // namespace dp::linalg
