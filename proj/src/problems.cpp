#include "dp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dp::problems {

using nlohmann::json;

std::string loss_kind_name(LossKind k) {
  return k == LossKind::LogisticRegression ? "logistic" : "linear";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "logistic") return LossKind::LogisticRegression;
  if (name == "linear") return LossKind::LinearRegressionSquaredLoss;
  throw ConfigError("unknown loss kind: " + name);
}

Dataset::Dataset(MatrixXd features_in, VectorXd labels_in)
    : features(std::move(features_in)), labels(std::move(labels_in)) {
  if (features.rows() != labels.size())
    throw DimensionMismatch("Dataset: feature/label count mismatch");
  if (features.rows() < 2) throw InvalidSpec("Dataset: need n >= 2 records");
  if (features.cols() < 1) throw InvalidSpec("Dataset: need p >= 1 features");
}

Dataset Dataset::without_record(int index) const {
  if (index < 0 || index >= n()) throw IndexOutOfRange("Dataset::without_record: bad index");
  MatrixXd f(n() - 1, p());
  VectorXd l(n() - 1);
  int row = 0;
  for (int i = 0; i < n(); ++i) {
    if (i == index) continue;
    f.row(row) = features.row(i);
    l[row] = labels[i];
    ++row;
  }
  return Dataset(std::move(f), std::move(l));
}

// ---------------------------------------------------------------------------
// Loss primitives
// ---------------------------------------------------------------------------

namespace {

double logistic_loss_one(double margin) {
  // log(1 + exp(-margin)), stable in both tails
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

VectorXd raw_example_gradient(const ErmProblem& problem, const VectorXd& theta, int i) {
  const auto x = problem.dataset.features.row(i).transpose();
  const double y = problem.dataset.labels[i];
  if (problem.loss_kind == LossKind::LogisticRegression) {
    const double margin = y * x.dot(theta);
    return VectorXd(-y * sigmoid(-margin) * x);
  }
  const double resid = x.dot(theta) - y;
  return VectorXd(resid * x);
}

VectorXd clip_to(VectorXd g, double bound) {
  const double norm = g.norm();
  if (norm > bound) g *= bound / norm;
  return g;
}

VectorXd euclidean_project(const VectorXd& theta, const ConstraintSet& c) {
  if (!c.is_ball()) return theta;
  const double norm = theta.norm();
  if (norm <= c.radius) return theta;
  return theta * (c.radius / norm);
}

}  // namespace

double batch_loss(const ErmProblem& problem, const VectorXd& theta) {
  if (theta.size() != problem.p()) throw DimensionMismatch("batch_loss: theta dim mismatch");
  double total = 0.0;
  for (int i = 0; i < problem.n(); ++i) {
    const auto x = problem.dataset.features.row(i).transpose();
    const double y = problem.dataset.labels[i];
    if (problem.loss_kind == LossKind::LogisticRegression)
      total += logistic_loss_one(y * x.dot(theta));
    else {
      const double resid = x.dot(theta) - y;
      total += 0.5 * resid * resid;
    }
  }
  return total / problem.n();
}

VectorXd per_example_gradient(const ErmProblem& problem, const VectorXd& theta, int index,
                              double clip_bound) {
  if (theta.size() != problem.p())
    throw DimensionMismatch("per_example_gradient: theta dim mismatch");
  if (index < 0 || index >= problem.n())
    throw IndexOutOfRange("per_example_gradient: record index out of range");
  const double bound = std::min(problem.lipschitz_l, clip_bound);
  return clip_to(raw_example_gradient(problem, theta, index), bound);
}

VectorXd per_example_gradient(const ErmProblem& problem, const VectorXd& theta, int index) {
  return per_example_gradient(problem, theta, index, problem.lipschitz_l);
}

VectorXd batch_gradient(const ErmProblem& problem, const VectorXd& theta, double clip_bound,
                        double* max_example_norm) {
  if (theta.size() != problem.p()) throw DimensionMismatch("batch_gradient: theta dim mismatch");
  const double bound = std::min(problem.lipschitz_l, clip_bound);
  VectorXd sum = VectorXd::Zero(problem.p());
  double max_norm = 0.0;
  for (int i = 0; i < problem.n(); ++i) {
    const VectorXd g = clip_to(raw_example_gradient(problem, theta, i), bound);
    max_norm = std::max(max_norm, g.norm());
    sum += g;
  }
  if (max_example_norm != nullptr) *max_example_norm = max_norm;
  return sum / problem.n();
}

VectorXd batch_gradient(const ErmProblem& problem, const VectorXd& theta) {
  return batch_gradient(problem, theta, problem.lipschitz_l, nullptr);
}

VectorXd batch_gradient_excluding(const ErmProblem& problem, const VectorXd& theta, int excluded) {
  if (excluded < 0 || excluded >= problem.n())
    throw IndexOutOfRange("batch_gradient_excluding: record index out of range");
  VectorXd sum = VectorXd::Zero(problem.p());
  for (int i = 0; i < problem.n(); ++i) {
    if (i == excluded) continue;
    sum += clip_to(raw_example_gradient(problem, theta, i), problem.lipschitz_l);
  }
  return sum / problem.n();
}

// ---------------------------------------------------------------------------
// Synthetic low-rank GLM generator
// ---------------------------------------------------------------------------

GeneratedProblem generate_low_rank_glm_full(const LowRankSpec& spec, int n, LossKind loss_kind,
                                            Rng& rng, const GeneratorOptions& opts) {
  const int p = spec.ambient_p;
  const int k = spec.intrinsic_k;
  if (k > p) throw InvalidSpec("generate_low_rank_glm: intrinsic_k exceeds ambient_p");
  if (k < 1 || p < 1) throw InvalidSpec("generate_low_rank_glm: dims must be >= 1");
  if (n < 2) throw InvalidSpec("generate_low_rank_glm: need n >= 2");

  // Only the basis stream touches p-many draws; coefficients, planted
  // parameter, labels and noise are k- or n-indexed so the same seed yields
  // the same intrinsic data at every ambient dimension.
  Rng basis_rng = rng.fork("basis");
  MatrixXd raw(p, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < p; ++i) raw(i, j) = basis_rng.normal();
  const MatrixXd basis = linalg::detail::orthonormal_span(raw);
  if (basis.cols() != k) throw InvalidSpec("generate_low_rank_glm: basis draw degenerate");

  Rng planted_rng = rng.fork("planted");
  VectorXd w(k);
  for (int j = 0; j < k; ++j) w[j] = planted_rng.normal();
  w *= opts.planted_norm / w.norm();
  const VectorXd planted = basis * w;

  Rng coeff_rng = rng.fork("coeff");
  Rng label_rng = rng.fork("labels");
  Rng noise_rng = rng.fork("noise");
  Rng ambient_rng = rng.fork("ambient");

  MatrixXd features(n, p);
  VectorXd labels(n);
  for (int i = 0; i < n; ++i) {
    VectorXd z(k);
    for (int j = 0; j < k; ++j) z[j] = coeff_rng.normal();
    const double zn = z.norm();
    VectorXd x = basis * (z / zn);
    // the intrinsic margin is computed in k coordinates so the same seed
    // yields identical labels at every ambient dimension
    double margin = (z / zn).dot(w);
    if (opts.ambient_noise > 0.0) {
      for (int j = 0; j < p; ++j) x[j] += opts.ambient_noise * ambient_rng.normal();
      x /= x.norm();
      margin = x.dot(planted);
    }
    features.row(i) = x.transpose();
    if (loss_kind == LossKind::LogisticRegression)
      labels[i] = label_rng.uniform() < sigmoid(margin) ? 1.0 : -1.0;
    else
      labels[i] = margin + opts.label_noise * noise_rng.normal();
  }

  GeneratedProblem out;
  out.problem.dataset = Dataset(std::move(features), std::move(labels));
  out.problem.loss_kind = loss_kind;
  out.problem.lipschitz_l = 1.0;
  out.problem.constraint = ConstraintSet::unconstrained();
  out.true_projector = linalg::OrthoProjector::from_basis(basis);
  out.planted_theta = planted;
  return out;
}

std::pair<ErmProblem, linalg::OrthoProjector> generate_low_rank_glm(
    const LowRankSpec& spec, int n, LossKind loss_kind, Rng& rng, const GeneratorOptions& opts) {
  GeneratedProblem g = generate_low_rank_glm_full(spec, n, loss_kind, rng, opts);
  return {std::move(g.problem), std::move(g.true_projector)};
}

// ---------------------------------------------------------------------------
// reference_optimum
// ---------------------------------------------------------------------------

ReferenceOptimum reference_optimum(const ErmProblem& problem, int budget) {
  if (budget < 1) throw InvalidParams("reference_optimum: budget must be >= 1");
  const double kResidualTarget = 1e-8;

  VectorXd theta = VectorXd::Zero(problem.p());
  double fx = batch_loss(problem, theta);
  double step = 1.0;

  ReferenceOptimum out;
  for (int it = 0; it < budget; ++it) {
    const VectorXd g = batch_gradient(problem, theta);
    const double residual = (theta - euclidean_project(theta - g, problem.constraint)).norm();
    out.iterations = it;
    out.residual = residual;
    if (residual <= kResidualTarget) {
      out.converged = true;
      break;
    }
    // backtracking with a proximal Armijo condition
    bool moved = false;
    while (step > 1e-18) {
      const VectorXd cand = euclidean_project(theta - step * g, problem.constraint);
      const double fc = batch_loss(problem, cand);
      const double decrease = (cand - theta).squaredNorm() / step;
      if (fc <= fx - 1e-4 * decrease) {
        theta = cand;
        fx = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // step underflow: no further progress possible
    step = std::min(step * 1.5, 1e6);
  }
  out.theta_star = theta;
  out.loss_star = fx;
  if (!out.converged) {
    const VectorXd g = batch_gradient(problem, theta);
    out.residual = (theta - euclidean_project(theta - g, problem.constraint)).norm();
    out.converged = out.residual <= kResidualTarget;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV + manifest IO
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json constraint_to_json(const ConstraintSet& c) {
  if (c.is_ball()) return json{{"kind", "ball"}, {"radius", c.radius}};
  return json{{"kind", "unconstrained"}};
}

ConstraintSet constraint_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ball") return ConstraintSet::ball(j.at("radius").get<double>());
  if (kind == "unconstrained") return ConstraintSet::unconstrained();
  throw ConfigError("unknown constraint kind: " + kind);
}

}  // namespace

void save_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (int i = 0; i < dataset.n(); ++i) {
    for (int j = 0; j < dataset.p(); ++j) out << format_double(dataset.features(i, j)) << ',';
    out << format_double(dataset.labels[i]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("ragged csv row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2 || rows.front().size() < 2) throw IoError("csv too small: " + path);
  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(rows.front().size()) - 1;
  MatrixXd features(n, p);
  VectorXd labels(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) features(i, j) = rows[i][j];
    labels[i] = rows[i][p];
  }
  return Dataset(std::move(features), std::move(labels));
}

void save_problem(const ErmProblem& problem, const std::string& csv_path,
                  const std::string& manifest_path) {
  save_dataset_csv(problem.dataset, csv_path);
  json manifest{{"p", problem.p()},
                {"n", problem.n()},
                {"loss_kind", loss_kind_name(problem.loss_kind)},
                {"lipschitz_l", problem.lipschitz_l},
                {"constraint", constraint_to_json(problem.constraint)}};
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot open for writing: " + manifest_path);
  out << manifest.dump(2) << '\n';
}

ErmProblem load_problem(const std::string& csv_path, const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open for reading: " + manifest_path);
  json manifest;
  in >> manifest;
  ErmProblem problem;
  problem.dataset = load_dataset_csv(csv_path);
  problem.loss_kind = loss_kind_from_name(manifest.at("loss_kind").get<std::string>());
  problem.lipschitz_l = manifest.at("lipschitz_l").get<double>();
  problem.constraint = constraint_from_json(manifest.at("constraint"));
  if (problem.p() != manifest.at("p").get<int>() || problem.n() != manifest.at("n").get<int>())
    throw IoError("manifest/csv dimension mismatch for " + csv_path);
  return problem;
}

}  // namespace dp::problems
