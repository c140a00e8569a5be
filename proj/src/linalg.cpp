#include "dp/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace dp::linalg {

// ---------------------------------------------------------------------------
// SymMatrix
// ---------------------------------------------------------------------------

SymMatrix::SymMatrix(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("SymMatrix: matrix is not square");
  if (m.rows() < 1) throw InvalidParams("SymMatrix: dim must be >= 1");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) throw InvalidParams("SymMatrix: matrix is not symmetric");
  m_ = m;
  for (int j = 0; j < m_.cols(); ++j)
    for (int i = j + 1; i < m_.rows(); ++i) m_(i, j) = m_(j, i);
}

SymMatrix SymMatrix::zero(int dim) {
  if (dim < 1) throw InvalidParams("SymMatrix: dim must be >= 1");
  SymMatrix s;
  s.m_ = MatrixXd::Zero(dim, dim);
  return s;
}

SymMatrix SymMatrix::identity(int dim) {
  if (dim < 1) throw InvalidParams("SymMatrix: dim must be >= 1");
  SymMatrix s;
  s.m_ = MatrixXd::Identity(dim, dim);
  return s;
}

SymMatrix SymMatrix::diagonal(const VectorXd& d) {
  if (d.size() < 1) throw InvalidParams("SymMatrix: dim must be >= 1");
  SymMatrix s;
  s.m_ = d.asDiagonal();
  return s;
}

SymMatrix SymMatrix::symmetrized(MatrixXd m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("SymMatrix: matrix is not square");
  SymMatrix s;
  s.m_ = std::move(m);
  for (int j = 0; j < s.m_.cols(); ++j)
    for (int i = j + 1; i < s.m_.rows(); ++i) {
      const double v = 0.5 * (s.m_(i, j) + s.m_(j, i));
      s.m_(i, j) = v;
      s.m_(j, i) = v;
    }
  return s;
}

VectorXd SymMatrix::apply(const VectorXd& x) const {
  if (x.size() != m_.rows()) throw DimensionMismatch("SymMatrix::apply: size mismatch");
  return m_ * x;
}

SymMatrix SymMatrix::operator+(const SymMatrix& other) const {
  if (dim() != other.dim()) throw DimensionMismatch("SymMatrix: dim mismatch in +");
  SymMatrix s;
  s.m_ = m_ + other.m_;
  return s;
}

SymMatrix SymMatrix::operator-(const SymMatrix& other) const {
  if (dim() != other.dim()) throw DimensionMismatch("SymMatrix: dim mismatch in -");
  SymMatrix s;
  s.m_ = m_ - other.m_;
  return s;
}

SymMatrix SymMatrix::scaled(double s) const {
  SymMatrix r;
  r.m_ = m_ * s;
  return r;
}

// ---------------------------------------------------------------------------
// Spectral decomposition
// ---------------------------------------------------------------------------

double SpectralDecomposition::max_abs_eigenvalue() const {
  if (eigenvalues.size() == 0) return 0.0;
  return eigenvalues.cwiseAbs().maxCoeff();
}

namespace detail {

SpectralDecomposition sym_eig(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw NonConvergence("sym_eig: eigendecomposition failed");
  const int n = static_cast<int>(a.rows());
  SpectralDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  return out;
}

double operator_norm_dense(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NonConvergence("operator_norm: eigendecomposition failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd orthonormal_span(const MatrixXd& m, double tol) {
  const int p = static_cast<int>(m.rows());
  MatrixXd q(p, std::min<int>(p, static_cast<int>(m.cols())));
  int r = 0;
  for (int j = 0; j < m.cols(); ++j) {
    VectorXd v = m.col(j);
    const double scale = v.norm();
    if (scale == 0.0) continue;
    // two Gram-Schmidt passes for numerical orthogonality
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < r; ++i) v -= q.col(i).dot(v) * q.col(i);
    if (v.norm() > tol * scale) {
      q.col(r++) = v / v.norm();
      if (r == p) break;
    }
  }
  return q.leftCols(r);
}

double projector_distance(const MatrixXd& basis_a, const MatrixXd& basis_b) {
  if (basis_a.rows() != basis_b.rows())
    throw DimensionMismatch("projector_distance: ambient dim mismatch");
  if (basis_a.cols() == 0 && basis_b.cols() == 0) return 0.0;
  MatrixXd joint(basis_a.rows(), basis_a.cols() + basis_b.cols());
  joint << basis_a, basis_b;
  const MatrixXd u = orthonormal_span(joint);
  const MatrixXd a = u.transpose() * basis_a;
  const MatrixXd b = u.transpose() * basis_b;
  const MatrixXd d = a * a.transpose() - b * b.transpose();
  if (d.rows() == 0) return 0.0;
  return operator_norm_dense(0.5 * (d + d.transpose()));
}

}  // namespace detail

SpectralDecomposition spectral(const SymMatrix& a) { return detail::sym_eig(a.mat()); }

double lambda_min_pos(const SpectralDecomposition& s, double rel_tol) {
  const double cutoff = rel_tol * s.max_abs_eigenvalue();
  double result = 0.0;
  for (int i = 0; i < s.dim(); ++i)
    if (s.eigenvalues[i] > cutoff) result = s.eigenvalues[i];
  return result;
}

// ---------------------------------------------------------------------------
// OrthoProjector
// ---------------------------------------------------------------------------

OrthoProjector OrthoProjector::from_basis(const MatrixXd& basis) {
  const int p = static_cast<int>(basis.rows());
  const int k = static_cast<int>(basis.cols());
  if (p < 1) throw InvalidParams("OrthoProjector: dim must be >= 1");
  if (k > p) throw InvalidParams("OrthoProjector: rank exceeds dim");
  if (k > 0) {
    const MatrixXd gram = basis.transpose() * basis;
    const double err = (gram - MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
    if (err > 1e-8) throw InvalidParams("OrthoProjector: basis columns not orthonormal");
  }
  OrthoProjector proj;
  proj.basis_ = basis;
  proj.rank_ = k;
  proj.matrix_ = SymMatrix::symmetrized(basis * basis.transpose());
  return proj;
}

OrthoProjector OrthoProjector::identity(int dim) {
  return from_basis(MatrixXd::Identity(dim, dim));
}

OrthoProjector OrthoProjector::zero(int dim) { return from_basis(MatrixXd(dim, 0)); }

OrthoProjector OrthoProjector::from_matrix(const SymMatrix& m) {
  const SpectralDecomposition s = spectral(m);
  int rank = 0;
  for (int i = 0; i < s.dim(); ++i) {
    if (s.eigenvalues[i] > 0.5) {
      if (std::abs(s.eigenvalues[i] - 1.0) > 1e-6)
        throw InvalidParams("OrthoProjector: matrix is not a projector");
      ++rank;
    } else if (std::abs(s.eigenvalues[i]) > 1e-6) {
      throw InvalidParams("OrthoProjector: matrix is not a projector");
    }
  }
  OrthoProjector proj;
  proj.basis_ = s.eigenvectors.leftCols(rank);
  proj.rank_ = rank;
  proj.matrix_ = m;
  return proj;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

SymMatrix psd_sqrt(const SymMatrix& a) {
  const SpectralDecomposition s = spectral(a);
  const double op = s.max_abs_eigenvalue();
  const double tol = kPsdTol * op;
  VectorXd lam = s.eigenvalues;
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -tol) throw NotPsd("psd_sqrt: matrix has a negative eigenvalue");
    lam[i] = std::sqrt(std::max(0.0, lam[i]));
  }
  return SymMatrix::symmetrized(s.eigenvectors * lam.asDiagonal() * s.eigenvectors.transpose());
}

PinvResult pinv_full(const SymMatrix& a, double rank_tol) {
  if (!(rank_tol > 0.0)) throw InvalidParams("pinv: rank_tol must be positive");
  const SpectralDecomposition s = spectral(a);
  const double cutoff = rank_tol * s.max_abs_eigenvalue();
  VectorXd inv = VectorXd::Zero(s.dim());
  int rank = 0;
  for (int i = 0; i < s.dim(); ++i) {
    if (std::abs(s.eigenvalues[i]) > cutoff) {
      inv[i] = 1.0 / s.eigenvalues[i];
      ++rank;
    }
  }
  PinvResult out;
  out.matrix =
      SymMatrix::symmetrized(s.eigenvectors * inv.asDiagonal() * s.eigenvectors.transpose());
  out.rank = rank;
  return out;
}

SymMatrix pinv(const SymMatrix& a, double rank_tol) { return pinv_full(a, rank_tol).matrix; }

SymMatrix goe_sample(int dim, Rng& rng) {
  if (dim < 1) throw InvalidParams("goe_sample: dim must be >= 1");
  MatrixXd m(dim, dim);
  const double sqrt2 = std::sqrt(2.0);
  for (int i = 0; i < dim; ++i) {
    m(i, i) = sqrt2 * rng.normal();
    for (int j = i + 1; j < dim; ++j) {
      const double v = rng.normal();
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  SymMatrix out = SymMatrix::symmetrized(std::move(m));
  return out;
}

double operator_norm(const SymMatrix& a) { return detail::operator_norm_dense(a.mat()); }

OrthoProjector top_k_projector(const SymMatrix& a, int k) {
  if (k < 1 || k > a.dim()) throw InvalidParams("top_k_projector: k out of range");
  const SpectralDecomposition s = spectral(a);
  if (k < a.dim()) {
    const double gap = s.eigenvalues[k - 1] - s.eigenvalues[k];
    if (gap <= 1e-12 * s.max_abs_eigenvalue())
      throw DegenerateSpectrum("top_k_projector: eigenvalue gap at k is numerically zero");
  }
  return OrthoProjector::from_basis(s.eigenvectors.leftCols(k));
}

double mahalanobis_norm(const VectorXd& x, const SymMatrix& a) {
  if (x.size() != a.dim()) throw DimensionMismatch("mahalanobis_norm: size mismatch");
  const double q = x.dot(a.mat() * x);
  return std::sqrt(std::max(0.0, q));
}

namespace detail {

VectorXd ball_secular_solve(const VectorXd& lambda, const VectorXd& c, double radius) {
  const auto z_of = [&](double mu) {
    return VectorXd((lambda.array() * c.array()) / (lambda.array() + mu));
  };
  const double tol = 1e-10 * std::max(1.0, radius);

  double lo = 0.0;
  double hi = std::max(lambda.maxCoeff(), 1.0);
  while (z_of(hi).norm() > radius) {
    lo = hi;
    hi *= 4.0;
    if (hi > 1e300) throw NonConvergence("seminorm_project: bracket expansion failed");
  }

  double mu = lo;
  for (int iter = 0; iter < 200; ++iter) {
    const VectorXd z = z_of(mu);
    const double phi = z.norm();
    if (std::abs(phi - radius) <= tol) return z;
    if (phi > radius)
      lo = mu;
    else
      hi = mu;
    // Newton step on g(mu) = 1/phi - 1/r (nearly linear in mu).
    const double dphi = -(z.array().square() / (lambda.array() + mu)).sum() / phi;
    const double g = 1.0 / phi - 1.0 / radius;
    const double dg = -dphi / (phi * phi);
    double next = mu - g / dg;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  throw NonConvergence("seminorm_project: multiplier solve exceeded 200 iterations");
}

VectorXd seminorm_project_with_spectrum(const VectorXd& y, const SpectralDecomposition& h,
                                        const ConstraintSet& c, double rank_tol) {
  if (!c.is_ball()) return y;
  const double r = c.radius;
  const double op = h.max_abs_eigenvalue();
  if (h.eigenvalues.size() > 0 && h.eigenvalues.minCoeff() < -kPsdTol * op)
    throw NotPsd("seminorm_project: H has a negative eigenvalue");

  const double cutoff = std::max(rank_tol * op, 0.0);
  int rank = 0;
  for (int i = 0; i < h.dim(); ++i)
    if (h.eigenvalues[i] > cutoff) ++rank;

  const MatrixXd range = h.eigenvectors.leftCols(rank);
  const VectorXd lam = h.eigenvalues.head(rank);
  const VectorXd coords = range.transpose() * y;
  const VectorXd kernel_part = y - range * coords;

  VectorXd z;
  if (coords.norm() <= r || rank == 0)
    z = coords;
  else
    z = ball_secular_solve(lam, coords, r);

  const double headroom_sq = std::max(0.0, r * r - z.squaredNorm());
  const double kn = kernel_part.norm();
  VectorXd kept = kernel_part;
  if (kn * kn > headroom_sq) kept *= std::sqrt(headroom_sq) / kn;
  return range * z + kept;
}

}  // namespace detail

VectorXd seminorm_project(const VectorXd& y, const SymMatrix& h, const ConstraintSet& c,
                          double rank_tol) {
  if (!c.is_ball()) return y;
  if (y.size() != h.dim()) throw DimensionMismatch("seminorm_project: size mismatch");
  return detail::seminorm_project_with_spectrum(y, spectral(h), c, rank_tol);
}

}  // namespace dp::linalg
