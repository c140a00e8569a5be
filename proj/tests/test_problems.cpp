#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <Eigen/SVD>

#include "dp/problems.hpp"

using namespace dp;
using namespace dp::problems;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ErmProblem two_point_linear() {
  MatrixXd f(2, 2);
  f << 1.0, 0.0, 0.0, 1.0;
  VectorXd l(2);
  l << 1.0, -0.5;
  ErmProblem p;
  p.dataset = Dataset(f, l);
  p.loss_kind = LossKind::LinearRegressionSquaredLoss;
  p.lipschitz_l = 100.0;
  return p;
}

}  // namespace

TEST_CASE("dataset invariants") {
  MatrixXd f(1, 2);
  f << 1.0, 2.0;
  VectorXd l(1);
  l << 1.0;
  CHECK_THROWS_AS(Dataset(f, l), InvalidSpec);  // n >= 2 required

  MatrixXd f2(3, 2);
  f2.setOnes();
  VectorXd l2(2);
  CHECK_THROWS_AS(Dataset(f2, l2), DimensionMismatch);
}

TEST_CASE("generator: full-rank case returns the identity projector") {
  Rng rng(1);
  LowRankSpec spec{10, 10, 1};
  auto [problem, projector] =
      generate_low_rank_glm(spec, 100, LossKind::LogisticRegression, rng);
  CHECK(projector.rank() == 10);
  CHECK((projector.matrix().mat() - MatrixXd::Identity(10, 10)).norm() <= 1e-8);
  CHECK(problem.n() == 100);
}

TEST_CASE("generator: features lie exactly in the planted subspace") {
  Rng rng(2);
  LowRankSpec spec{50, 3, 2};
  auto [problem, projector] =
      generate_low_rank_glm(spec, 200, LossKind::LogisticRegression, rng);
  const MatrixXd residual =
      problem.dataset.features -
      problem.dataset.features * projector.matrix().mat().transpose();
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK_THROWS_AS(generate_low_rank_glm(LowRankSpec{3, 5, 0}, 10,
                                        LossKind::LogisticRegression, rng),
                  InvalidSpec);
}

TEST_CASE("generator: stacked gradients have rank k (SVD oracle)") {
  Rng rng(3);
  LowRankSpec spec{20, 5, 3};
  auto [problem, projector] =
      generate_low_rank_glm(spec, 500, LossKind::LogisticRegression, rng);

  MatrixXd stacked(10, 20);
  Rng theta_rng(77);
  for (int i = 0; i < 10; ++i) {
    VectorXd theta(20);
    for (int j = 0; j < 20; ++j) theta[j] = 0.3 * theta_rng.normal();
    stacked.row(i) = batch_gradient(problem, theta).transpose();
  }
  const Eigen::JacobiSVD<MatrixXd> svd(stacked);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * svd.singularValues()[0]) ++rank;
  CHECK(rank == 5);
}

TEST_CASE("generator: intrinsic data is identical across ambient dimensions") {
  Rng rng_a(9), rng_b(9);
  auto gen_small = generate_low_rank_glm_full(LowRankSpec{10, 4, 9}, 50,
                                              LossKind::LogisticRegression, rng_a);
  auto gen_big = generate_low_rank_glm_full(LowRankSpec{300, 4, 9}, 50,
                                            LossKind::LogisticRegression, rng_b);
  CHECK((gen_small.problem.dataset.labels - gen_big.problem.dataset.labels).norm() == 0.0);
  // pairwise Gram matrices agree: same coefficients, different embedding
  const MatrixXd g_small =
      gen_small.problem.dataset.features * gen_small.problem.dataset.features.transpose();
  const MatrixXd g_big =
      gen_big.problem.dataset.features * gen_big.problem.dataset.features.transpose();
  CHECK((g_small - g_big).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("batch_gradient: symmetric balanced logistic instance is stationary at zero") {
  MatrixXd f(4, 3);
  f << 1, 2, 0, -1, -2, 0, 0.5, -1, 1, -0.5, 1, -1;
  VectorXd l(4);
  l << 1, 1, 1, 1;  // mirrored features with equal labels cancel at theta = 0
  ErmProblem p;
  p.dataset = Dataset(f, l);
  p.loss_kind = LossKind::LogisticRegression;
  CHECK(batch_gradient(p, VectorXd::Zero(3)).norm() <= 1e-10);
}

TEST_CASE("batch_gradient: single-record linear case is hand-computable") {
  MatrixXd f(2, 2);
  f << 1, 0, 0, 0;  // second record contributes nothing
  VectorXd l(2);
  l << 0.0, 0.0;
  ErmProblem p;
  p.dataset = Dataset(f, l);
  p.loss_kind = LossKind::LinearRegressionSquaredLoss;
  p.lipschitz_l = 100.0;
  VectorXd theta(2);
  theta << 3.0, 0.0;
  const VectorXd g = batch_gradient(p, theta);
  // (1/2) * (<x, theta> - y) x = (1/2) * 3 * e1
  CHECK(g[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(g[1] == 0.0);
  CHECK_THROWS_AS(batch_gradient(p, VectorXd::Zero(3)), DimensionMismatch);
}

TEST_CASE("batch_gradient matches central finite differences of batch_loss") {
  Rng rng(4);
  LowRankSpec spec{8, 3, 4};
  auto [problem, projector] =
      generate_low_rank_glm(spec, 60, LossKind::LogisticRegression, rng);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd theta(8);
    for (int j = 0; j < 8; ++j) theta[j] = 0.4 * rng.normal();
    const VectorXd g = batch_gradient(problem, theta);
    VectorXd fd(8);
    const double h = 1e-6;
    for (int j = 0; j < 8; ++j) {
      VectorXd up = theta, down = theta;
      up[j] += h;
      down[j] -= h;
      fd[j] = (batch_loss(problem, up) - batch_loss(problem, down)) / (2.0 * h);
    }
    CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("per_example_gradient: clipping hits the bound exactly") {
  MatrixXd f(2, 2);
  f << 1, 0, 0, 1;
  VectorXd l(2);
  l << 1.0, 0.0;
  ErmProblem p;
  p.dataset = Dataset(f, l);
  p.loss_kind = LossKind::LinearRegressionSquaredLoss;
  p.lipschitz_l = 1.0;
  VectorXd theta(2);
  theta << 11.0, 0.0;  // raw gradient norm 10 on record 0
  const VectorXd g = per_example_gradient(p, theta, 0);
  CHECK(std::abs(g.norm() - 1.0) <= 1e-15);
  CHECK_THROWS_AS(per_example_gradient(p, theta, 5), IndexOutOfRange);
}

TEST_CASE("per_example_gradient averages to batch_gradient") {
  Rng rng(5);
  LowRankSpec spec{6, 2, 5};
  auto [problem, projector] =
      generate_low_rank_glm(spec, 40, LossKind::LogisticRegression, rng);
  VectorXd theta(6);
  for (int j = 0; j < 6; ++j) theta[j] = rng.normal();
  VectorXd sum = VectorXd::Zero(6);
  for (int i = 0; i < problem.n(); ++i) sum += per_example_gradient(problem, theta, i);
  CHECK((sum / problem.n() - batch_gradient(problem, theta)).norm() <= 1e-12);
}

TEST_CASE("batch_loss: logistic at zero is ln 2; linear at planted parameter is tiny") {
  Rng rng(6);
  auto [logistic, lp] =
      generate_low_rank_glm(LowRankSpec{10, 3, 6}, 50, LossKind::LogisticRegression, rng);
  CHECK(batch_loss(logistic, VectorXd::Zero(10)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng2(7);
  GeneratorOptions opts;
  opts.label_noise = 0.0;
  GeneratedProblem gen = generate_low_rank_glm_full(LowRankSpec{10, 3, 7}, 50,
                                                    LossKind::LinearRegressionSquaredLoss,
                                                    rng2, opts);
  CHECK(batch_loss(gen.problem, gen.planted_theta) <= 1e-20);
}

TEST_CASE("batch_loss convexity spot-check") {
  Rng rng(8);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{6, 3, 8}, 40, LossKind::LogisticRegression, rng);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd a(6), b(6);
    for (int j = 0; j < 6; ++j) {
      a[j] = rng.normal();
      b[j] = rng.normal();
    }
    const double mid = batch_loss(problem, 0.5 * (a + b));
    const double avg = 0.5 * (batch_loss(problem, a) + batch_loss(problem, b));
    CHECK(mid <= avg + 1e-12);
  }
}

TEST_CASE("reference_optimum: closed-form quadratic") {
  const ErmProblem p = two_point_linear();
  const ReferenceOptimum ref = reference_optimum(p, 5000);
  CHECK(ref.converged);
  CHECK(ref.theta_star[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(ref.theta_star[1] == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK_THROWS_AS(reference_optimum(p, 0), InvalidParams);
}

TEST_CASE("reference_optimum: first-order condition on logistic") {
  Rng rng(9);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{8, 3, 9}, 80, LossKind::LogisticRegression, rng);
  const ReferenceOptimum ref = reference_optimum(problem, 20000);
  CHECK(ref.converged);
  CHECK(batch_gradient(problem, ref.theta_star).norm() <= 1e-8);
}

TEST_CASE("reference_optimum: ball-constrained KKT residual") {
  Rng rng(10);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{8, 3, 10}, 80, LossKind::LogisticRegression, rng);
  problem.constraint = ConstraintSet::ball(0.5);
  const ReferenceOptimum ref = reference_optimum(problem, 20000);
  CHECK(ref.residual <= 1e-6);
  CHECK(ref.theta_star.norm() <= 0.5 + 1e-9);
}

TEST_CASE("Lipschitz contract holds at random query points") {
  Rng rng(11);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{10, 4, 11}, 50, LossKind::LinearRegressionSquaredLoss,
                            rng);
  problem.lipschitz_l = 0.7;
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXd theta(10);
    for (int j = 0; j < 10; ++j) theta[j] = 3.0 * rng.normal();
    const int i = rng.uniform_int(0, problem.n() - 1);
    CHECK(per_example_gradient(problem, theta, i).norm() <= 0.7 + 1e-12);
  }
}

TEST_CASE("gradient subspace containment along random queries") {
  Rng rng(12);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{30, 4, 12}, 60, LossKind::LogisticRegression, rng);
  const MatrixXd p = projector.matrix().mat();
  for (int trial = 0; trial < 25; ++trial) {
    VectorXd theta(30);
    for (int j = 0; j < 30; ++j) theta[j] = rng.normal();
    const VectorXd g = batch_gradient(problem, theta);
    CHECK((g - p * g).norm() <= 1e-10);
  }
}

TEST_CASE("neighboring gradient sensitivity under respective rescaling") {
  Rng rng(13);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{12, 4, 13}, 60, LossKind::LogisticRegression, rng);
  const double bound = 2.0 * problem.lipschitz_l / (problem.n() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    const int removed = rng.uniform_int(0, problem.n() - 1);
    ErmProblem neighbor = problem;
    neighbor.dataset = problem.dataset.without_record(removed);
    VectorXd theta(12);
    for (int j = 0; j < 12; ++j) theta[j] = rng.normal();
    const VectorXd diff =
        batch_gradient(problem, theta) - batch_gradient(neighbor, theta);
    CHECK(diff.norm() <= bound + 1e-12);
  }
}

TEST_CASE("csv and manifest round-trip") {
  Rng rng(14);
  auto [problem, projector] =
      generate_low_rank_glm(LowRankSpec{5, 2, 14}, 20, LossKind::LinearRegressionSquaredLoss,
                            rng);
  problem.constraint = ConstraintSet::ball(1.25);
  problem.lipschitz_l = 2.5;

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dp_precond_test_io";
  fs::create_directories(dir);
  const std::string csv = (dir / "data.csv").string();
  const std::string manifest = (dir / "manifest.json").string();
  save_problem(problem, csv, manifest);
  const ErmProblem loaded = load_problem(csv, manifest);

  CHECK(loaded.n() == problem.n());
  CHECK(loaded.p() == problem.p());
  CHECK(loaded.loss_kind == problem.loss_kind);
  CHECK(loaded.lipschitz_l == problem.lipschitz_l);
  CHECK(loaded.constraint.is_ball());
  CHECK(loaded.constraint.radius == problem.constraint.radius);
  CHECK((loaded.dataset.features - problem.dataset.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.dataset.labels - problem.dataset.labels).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}
