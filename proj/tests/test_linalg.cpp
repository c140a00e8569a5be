#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dp/linalg.hpp"

using namespace dp;
using namespace dp::linalg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SymMatrix random_psd(int dim, int rank, Rng& rng) {
  MatrixXd x(dim, rank);
  for (int j = 0; j < rank; ++j)
    for (int i = 0; i < dim; ++i) x(i, j) = rng.normal();
  return SymMatrix::symmetrized(x * x.transpose());
}

VectorXd random_vector(int dim, Rng& rng) {
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("SymMatrix enforces exact symmetry and rejects asymmetry") {
  MatrixXd m(2, 2);
  m << 1.0, 2.0, 2.0 + 1e-12, 3.0;
  SymMatrix s(m);
  CHECK(s(0, 1) == s(1, 0));

  m(1, 0) = 5.0;
  CHECK_THROWS_AS(SymMatrix{m}, InvalidParams);
  CHECK_THROWS_AS(SymMatrix::zero(0), InvalidParams);
}

TEST_CASE("spectral decomposition invariants") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = rng.uniform_int(1, 12);
    const SymMatrix a = goe_sample(dim, rng);
    const SpectralDecomposition s = spectral(a);
    for (int i = 1; i < dim; ++i) CHECK(s.eigenvalues[i - 1] >= s.eigenvalues[i]);
    const MatrixXd gram = s.eigenvectors.transpose() * s.eigenvectors;
    CHECK((gram - MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff() <= 1e-10);
    const MatrixXd rebuilt =
        s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose();
    CHECK((rebuilt - a.mat()).norm() <= 1e-8 * std::max(1.0, a.mat().norm()));
  }
}

TEST_CASE("psd_sqrt on identity and diagonal") {
  const SymMatrix id3 = SymMatrix::identity(3);
  CHECK((psd_sqrt(id3).mat() - id3.mat()).norm() <= 1e-12);

  VectorXd d(3);
  d << 4.0, 9.0, 0.0;
  VectorXd expected(3);
  expected << 2.0, 3.0, 0.0;
  const SymMatrix root = psd_sqrt(SymMatrix::diagonal(d));
  CHECK((root.mat() - MatrixXd(expected.asDiagonal())).norm() <= 1e-12);
}

TEST_CASE("psd_sqrt squaring oracle on random PSD matrices") {
  Rng rng(12);
  {
    const SymMatrix a = random_psd(5, 2, rng);
    const SymMatrix b = psd_sqrt(a);
    const MatrixXd sq = b.mat() * b.mat();
    CHECK((sq - a.mat()).norm() <= 1e-8 * std::max(1.0, a.mat().norm()));
  }
  for (int trial = 0; trial < 500; ++trial) {
    const int dim = rng.uniform_int(1, 20);
    const int rank = rng.uniform_int(1, dim);
    const SymMatrix a = random_psd(dim, rank, rng);
    const SymMatrix b = psd_sqrt(a);
    CHECK((b.mat() * b.mat() - a.mat()).norm() <= 1e-8 * std::max(1.0, a.mat().norm()));
  }
}

TEST_CASE("psd_sqrt rejects genuinely indefinite input") {
  VectorXd d(2);
  d << 1.0, -0.5;
  CHECK_THROWS_AS(psd_sqrt(SymMatrix::diagonal(d)), NotPsd);
}

TEST_CASE("pinv diagonal and identity cases") {
  VectorXd d(2);
  d << 2.0, 0.0;
  const SymMatrix inv = pinv(SymMatrix::diagonal(d));
  CHECK(inv(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(inv(1, 1) == doctest::Approx(0.0));

  const SymMatrix id4 = SymMatrix::identity(4);
  CHECK((pinv(id4).mat() - id4.mat()).norm() <= 1e-12);

  const SymMatrix zero = SymMatrix::zero(3);
  CHECK(pinv(zero).frobenius() == 0.0);
}

TEST_CASE("pinv satisfies the Penrose conditions and solves on the row space") {
  Rng rng(13);
  {
    const SymMatrix a = random_psd(6, 3, rng);
    const VectorXd z = random_vector(6, rng);
    const VectorXd b = a.apply(z);  // in the image by construction
    const VectorXd x = pinv(a).apply(b);
    CHECK((a.apply(x) - b).norm() <= 1e-8 * std::max(1.0, b.norm()));
  }
  for (int trial = 0; trial < 500; ++trial) {
    const int dim = rng.uniform_int(1, 12);
    const SymMatrix a = goe_sample(dim, rng);
    const SymMatrix ap = pinv(a);
    const double scale = std::max(1.0, a.mat().norm());
    CHECK((a.mat() * ap.mat() * a.mat() - a.mat()).norm() <= 1e-8 * scale);
    CHECK((ap.mat() * a.mat() * ap.mat() - ap.mat()).norm() <=
          1e-8 * std::max(1.0, ap.mat().norm()));
  }
}

TEST_CASE("pinv reports the retained rank") {
  VectorXd d(4);
  d << 3.0, 2.0, 1e-14, 0.0;
  const PinvResult r = pinv_full(SymMatrix::diagonal(d));
  CHECK(r.rank == 2);
}

TEST_CASE("goe_sample dim=1 diagonal variance") {
  double sum = 0.0, sum_sq = 0.0;
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) {
    Rng rng(static_cast<std::uint64_t>(s) + 1);
    const double v = goe_sample(1, rng)(0, 0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / samples;
  const double var = sum_sq / samples - mean * mean;
  CHECK(var >= 1.9);
  CHECK(var <= 2.1);
}

TEST_CASE("goe_sample symmetry, determinism and off-diagonal variance") {
  Rng rng1(7), rng2(7);
  const SymMatrix a = goe_sample(2, rng1);
  const SymMatrix b = goe_sample(2, rng2);
  CHECK(a(0, 1) == a(1, 0));
  CHECK((a.mat() - b.mat()).norm() == 0.0);

  Rng rng(99);
  double sum = 0.0, sum_sq = 0.0;
  long long count = 0;
  for (int s = 0; s < 400; ++s) {
    const SymMatrix m = goe_sample(50, rng);
    for (int i = 0; i < 50; ++i)
      for (int j = i + 1; j < 50; ++j) {
        sum += m(i, j);
        sum_sq += m(i, j) * m(i, j);
        ++count;
      }
  }
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  CHECK(var >= 0.98);
  CHECK(var <= 1.02);
}

TEST_CASE("operator_norm basics and power-iteration oracle") {
  VectorXd d(2);
  d << 3.0, -5.0;
  CHECK(operator_norm(SymMatrix::diagonal(d)) == doctest::Approx(5.0));
  CHECK(operator_norm(SymMatrix::zero(4)) == 0.0);

  Rng rng(21);
  const SymMatrix a = goe_sample(8, rng);
  VectorXd v = random_vector(8, rng).normalized();
  const MatrixXd a2 = a.mat() * a.mat();
  for (int it = 0; it < 5000; ++it) v = (a2 * v).normalized();
  const double oracle = std::sqrt(v.dot(a2 * v));
  CHECK(operator_norm(a) == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("top_k_projector axis-aligned and rank-1 cases") {
  VectorXd d(3);
  d << 5.0, 3.0, 1.0;
  const OrthoProjector p = top_k_projector(SymMatrix::diagonal(d), 2);
  MatrixXd expected = MatrixXd::Zero(3, 3);
  expected(0, 0) = expected(1, 1) = 1.0;
  CHECK((p.matrix().mat() - expected).norm() <= 1e-12);
  CHECK(p.rank() == 2);

  Rng rng(5);
  const VectorXd u = random_vector(4, rng);
  const SymMatrix outer = SymMatrix::symmetrized(u * u.transpose());
  const OrthoProjector p1 = top_k_projector(outer, 1);
  const MatrixXd want = u * u.transpose() / u.squaredNorm();
  CHECK((p1.matrix().mat() - want).norm() <= 1e-10);
}

TEST_CASE("top_k_projector commutes with its source and flags degeneracy") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix a = random_psd(6, 6, rng);
    const OrthoProjector p = top_k_projector(a, 3);
    CHECK((p.matrix().mat() * a.mat() - a.mat() * p.matrix().mat()).norm() <= 1e-8);
    const MatrixXd pm = p.matrix().mat();
    CHECK((pm * pm - pm).norm() <= 1e-10);
    CHECK(pm.trace() == doctest::Approx(p.rank()).epsilon(1e-8));
  }
  VectorXd d(3);
  d << 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(top_k_projector(SymMatrix::diagonal(d), 1), DegenerateSpectrum);
  CHECK_THROWS_AS(top_k_projector(SymMatrix::identity(3), 4), InvalidParams);
}

TEST_CASE("seminorm_project trivial cases") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = rng.uniform_int(1, 6);
    const SymMatrix h = random_psd(dim, rng.uniform_int(1, dim), rng);
    const ConstraintSet ball = ConstraintSet::ball(1.5);
    VectorXd y = random_vector(dim, rng);
    y *= rng.uniform(0.0, 1.0) * 1.5 / std::max(y.norm(), 1e-9);
    CHECK((seminorm_project(y, h, ball) - y).norm() <= 1e-12);
  }
  const VectorXd y = random_vector(3, rng);
  CHECK((seminorm_project(y, SymMatrix::identity(3), ConstraintSet::unconstrained()) - y)
            .norm() == 0.0);
  VectorXd far = VectorXd::Zero(4);
  far[3] = 2.0;
  const VectorXd proj = seminorm_project(far, SymMatrix::identity(4), ConstraintSet::ball(1.0));
  VectorXd want = VectorXd::Zero(4);
  want[3] = 1.0;
  CHECK((proj - want).norm() <= 1e-10);
}

TEST_CASE("seminorm_project against a grid/golden-section oracle") {
  VectorXd d(2);
  d << 4.0, 1.0;
  const SymMatrix h = SymMatrix::diagonal(d);
  VectorXd y(2);
  y << 2.0, 2.0;
  const VectorXd got = seminorm_project(y, h, ConstraintSet::ball(1.0));

  const auto objective = [&](double phi) {
    VectorXd theta(2);
    theta << std::cos(phi), std::sin(phi);
    return (theta - y).dot(h.mat() * (theta - y));
  };
  double best_phi = 0.0, best_val = objective(0.0);
  const int grid = 1000000;
  for (int i = 1; i < grid; ++i) {
    const double phi = 2.0 * 3.14159265358979323846 * i / grid;
    const double val = objective(phi);
    if (val < best_val) {
      best_val = val;
      best_phi = phi;
    }
  }
  VectorXd oracle(2);
  oracle << std::cos(best_phi), std::sin(best_phi);
  CHECK((got - oracle).norm() <= 1e-4);
  CHECK(got.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("seminorm_project keeps kernel freedom only inside the ball") {
  VectorXd d(2);
  d << 1.0, 0.0;
  const SymMatrix h = SymMatrix::diagonal(d);
  VectorXd y(2);
  y << 0.2, 0.5;
  const VectorXd kept = seminorm_project(y, h, ConstraintSet::ball(1.0));
  CHECK((kept - y).norm() <= 1e-12);

  y << 2.0, 2.0;
  const VectorXd shrunk = seminorm_project(y, h, ConstraintSet::ball(1.0));
  CHECK(shrunk[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(shrunk[1]) <= 1e-9);
  CHECK(shrunk.norm() <= 1.0 + 1e-9);
}

TEST_CASE("mahalanobis_norm basics and quadratic-form oracle") {
  VectorXd d(2);
  d << 9.0, 4.0;
  VectorXd x(2);
  x << 1.0, 0.0;
  CHECK(mahalanobis_norm(x, SymMatrix::diagonal(d)) == doctest::Approx(3.0));

  Rng rng(55);
  const VectorXd v = random_vector(4, rng);
  CHECK(mahalanobis_norm(v, SymMatrix::zero(4)) == 0.0);

  for (int trial = 0; trial < 50; ++trial) {
    const SymMatrix a = random_psd(5, 5, rng);
    const VectorXd z = random_vector(5, rng);
    double direct = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) direct += z[i] * a(i, j) * z[j];
    CHECK(mahalanobis_norm(z, a) ==
          doctest::Approx(std::sqrt(std::max(0.0, direct))).epsilon(1e-10));
  }
}

TEST_CASE("GOE spectral distribution is invariant under orthogonal conjugation") {
  // two-sample Kolmogorov-Smirnov on pooled eigenvalues, significance 0.01
  const int dim = 12, samples = 1000;
  Rng rng(77);
  const SymMatrix seed_mat = random_psd(dim, dim, rng);
  const MatrixXd q = spectral(seed_mat).eigenvectors;

  std::vector<double> base, conjugated;
  base.reserve(dim * samples);
  conjugated.reserve(dim * samples);
  for (int s = 0; s < samples; ++s) {
    const SymMatrix b1 = goe_sample(dim, rng);
    const SymMatrix b2 = goe_sample(dim, rng);
    const SpectralDecomposition e1 = spectral(b1);
    const SpectralDecomposition e2 = linalg::detail::sym_eig(q * b2.mat() * q.transpose());
    for (int i = 0; i < dim; ++i) {
      base.push_back(e1.eigenvalues[i]);
      conjugated.push_back(e2.eigenvalues[i]);
    }
  }
  std::sort(base.begin(), base.end());
  std::sort(conjugated.begin(), conjugated.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < base.size() && j < conjugated.size()) {
    if (base[i] <= conjugated[j])
      ++i;
    else
      ++j;
    const double f1 = static_cast<double>(i) / base.size();
    const double f2 = static_cast<double>(j) / conjugated.size();
    ks = std::max(ks, std::abs(f1 - f2));
  }
  const double n_eff = static_cast<double>(base.size()) / 2.0;
  const double critical = 1.628 * std::sqrt(1.0 / n_eff);  // alpha = 0.01
  CHECK(ks <= critical);
}

TEST_CASE("projector_distance agrees with the dense operator norm") {
  Rng rng(88);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = rng.uniform_int(2, 10);
    const SymMatrix a = random_psd(dim, dim, rng);
    const SymMatrix b = random_psd(dim, dim, rng);
    const int ka = rng.uniform_int(1, dim - 1);
    const int kb = rng.uniform_int(1, dim - 1);
    const MatrixXd ba = spectral(a).eigenvectors.leftCols(ka);
    const MatrixXd bb = spectral(b).eigenvectors.leftCols(kb);
    const MatrixXd diff = ba * ba.transpose() - bb * bb.transpose();
    const double dense = linalg::detail::operator_norm_dense(diff);
    CHECK(linalg::detail::projector_distance(ba, bb) == doctest::Approx(dense).epsilon(1e-9));
  }
}

TEST_CASE("seminorm_project reports non-convergence instead of looping") {
  // a pathological multiplier solve is hard to trigger; instead check the
  // iteration cap is wired by exercising a very ill-conditioned spectrum
  VectorXd d(4);
  d << 1e12, 1.0, 1e-8, 1e-12;
  VectorXd y(4);
  y << 5.0, 5.0, 5.0, 5.0;
  const VectorXd got = seminorm_project(y, SymMatrix::diagonal(d), ConstraintSet::ball(1.0));
  CHECK(got.norm() <= 1.0 + 1e-9);
}
