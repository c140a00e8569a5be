#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dp/common.hpp"
#include "dp/constraint.hpp"
#include "dp/linalg.hpp"

namespace dp::problems {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class LossKind { LogisticRegression, LinearRegressionSquaredLoss };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Dataset: n feature/label records of common dimension p. Labels are +-1 for
// logistic problems and real-valued for squared loss.
// ---------------------------------------------------------------------------
struct Dataset {
  MatrixXd features;  // n x p, one record per row
  VectorXd labels;    // n

  Dataset() = default;
  Dataset(MatrixXd features_in, VectorXd labels_in);

  int n() const { return static_cast<int>(features.rows()); }
  int p() const { return static_cast<int>(features.cols()); }

  // Neighboring dataset under the removal convention.
  Dataset without_record(int index) const;
};

// ---------------------------------------------------------------------------
// ErmProblem: dataset + per-example convex loss with enforced Lipschitz
// bound (per-example gradients are clipped to lipschitz_l before averaging).
// ---------------------------------------------------------------------------
struct ErmProblem {
  Dataset dataset;
  LossKind loss_kind = LossKind::LogisticRegression;
  double lipschitz_l = 1.0;
  ConstraintSet constraint;

  int n() const { return dataset.n(); }
  int p() const { return dataset.p(); }
};

struct LowRankSpec {
  int ambient_p = 1;
  int intrinsic_k = 1;
  std::uint64_t seed = 0;
};

struct GeneratorOptions {
  double label_noise = 0.1;   // stddev of linear-regression label noise
  double planted_norm = 2.0;  // |theta_plant|
  double ambient_noise = 0.0; // isotropic out-of-subspace feature noise (public-data studies)
};

// Features sampled in a k-dimensional subspace of R^p (random orthonormal
// basis times standard-normal coefficients, unit-normalized); labels from a
// planted parameter in the same subspace. Returns the true subspace
// projector. Only the basis draw depends on p, so datasets at different
// ambient dimensions share coefficient/label streams for a given rng seed.
std::pair<ErmProblem, linalg::OrthoProjector> generate_low_rank_glm(
    const LowRankSpec& spec, int n, LossKind loss_kind, Rng& rng,
    const GeneratorOptions& opts = {});

// Planted parameter of the most recent generate_low_rank_glm call semantics:
// generation also returns it through this accessor-style struct when needed.
struct GeneratedProblem {
  ErmProblem problem;
  linalg::OrthoProjector true_projector;
  VectorXd planted_theta;
};

GeneratedProblem generate_low_rank_glm_full(const LowRankSpec& spec, int n, LossKind loss_kind,
                                            Rng& rng, const GeneratorOptions& opts = {});

// ---------------------------------------------------------------------------
// Loss / gradient oracles. clip_bound overrides the problem's Lipschitz
// bound for schedule-driven clipping; the effective bound is
// min(lipschitz_l, clip_bound).
// ---------------------------------------------------------------------------

double batch_loss(const ErmProblem& problem, const VectorXd& theta);

VectorXd batch_gradient(const ErmProblem& problem, const VectorXd& theta);
VectorXd batch_gradient(const ErmProblem& problem, const VectorXd& theta, double clip_bound,
                        double* max_example_norm);

VectorXd per_example_gradient(const ErmProblem& problem, const VectorXd& theta, int index);
VectorXd per_example_gradient(const ErmProblem& problem, const VectorXd& theta, int index,
                              double clip_bound);

// Batch gradient over records [0, n) excluding `excluded`, still weighted by
// 1/n (the fixed-weight neighboring gradient used by the sensitivity suite).
VectorXd batch_gradient_excluding(const ErmProblem& problem, const VectorXd& theta, int excluded);

// ---------------------------------------------------------------------------
// reference_optimum: high-accuracy non-private minimizer via full-gradient
// projected descent with backtracking line search.
// ---------------------------------------------------------------------------
struct ReferenceOptimum {
  VectorXd theta_star;
  double loss_star = 0.0;
  double residual = 0.0;  // gradient norm (unconstrained) or fixed-point KKT residual
  bool converged = false;
  int iterations = 0;
};

ReferenceOptimum reference_optimum(const ErmProblem& problem, int budget);

// ---------------------------------------------------------------------------
// Dataset import/export: CSV with one record per row (label last column)
// plus a JSON manifest {p, n, loss_kind, L, constraint}.
// ---------------------------------------------------------------------------
void save_dataset_csv(const Dataset& dataset, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

void save_problem(const ErmProblem& problem, const std::string& csv_path,
                  const std::string& manifest_path);
ErmProblem load_problem(const std::string& csv_path, const std::string& manifest_path);

}  // namespace dp::problems
