#include "dp/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace dp::subspace {

using nlohmann::json;

SubspaceEstimate SubspaceEstimate::make(linalg::OrthoProjector truth,
                                        linalg::OrthoProjector oracle) {
  if (truth.dim() != oracle.dim())
    throw DimensionMismatch("SubspaceEstimate: projector dims differ");
  SubspaceEstimate est;
  est.gamma = projector_mismatch(truth, oracle);
  est.true_projector = std::move(truth);
  est.oracle_projector = std::move(oracle);
  return est;
}

double projector_mismatch(const linalg::OrthoProjector& a, const linalg::OrthoProjector& b) {
  return linalg::detail::projector_distance(a.basis(), b.basis());
}

std::string oracle_kind_name(OracleKind k) {
  switch (k) {
    case OracleKind::Exact: return "exact";
    case OracleKind::PublicData: return "public";
    case OracleKind::Corrupted: return "corrupted";
  }
  throw InvalidParams("oracle_kind_name: bad enum");
}

OracleKind oracle_kind_from_name(const std::string& name) {
  if (name == "exact") return OracleKind::Exact;
  if (name == "public") return OracleKind::PublicData;
  if (name == "corrupted") return OracleKind::Corrupted;
  throw ConfigError("unknown oracle kind: " + name);
}

void OracleConfig::validate() const {
  if (k < 1) throw InvalidParams("oracle: k must be >= 1");
  if (kind == OracleKind::PublicData && public_m < k)
    throw InvalidParams("oracle: public_m must be >= k");
  if (kind == OracleKind::Corrupted &&
      !(corruption_angle >= 0.0 && corruption_angle <= 1.5707963267948967))
    throw InvalidParams("oracle: corruption angle must be in [0, pi/2]");
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

namespace {

// Span cutoff deliberately looser than pinv's rank tolerance; see header.
constexpr double kSpanSvTol = 1e-12;

MatrixXd top_subspace_of_second_moment(const MatrixXd& second_moment, int k) {
  const linalg::SpectralDecomposition s = linalg::detail::sym_eig(second_moment);
  const double lead = std::max(s.eigenvalues[0], 0.0);
  // eigenvalues of sum g g^T are squared singular values of the stack
  const double cutoff = kSpanSvTol * kSpanSvTol * lead;
  int span = 0;
  for (int i = 0; i < s.dim(); ++i)
    if (s.eigenvalues[i] > cutoff && s.eigenvalues[i] > 0.0) ++span;
  const int rank = std::min(k, span);
  return s.eigenvectors.leftCols(rank);
}

}  // namespace

MatrixXd exact_oracle_basis(const std::vector<VectorXd>& gradient_history, int k) {
  if (gradient_history.empty()) throw EmptyHistory("exact_oracle: empty gradient history");
  if (k < 1) throw InvalidParams("exact_oracle: k must be >= 1");
  const int p = static_cast<int>(gradient_history.front().size());
  MatrixXd moment = MatrixXd::Zero(p, p);
  for (const VectorXd& g : gradient_history) {
    if (g.size() != p) throw DimensionMismatch("exact_oracle: inconsistent gradient dims");
    moment.noalias() += g * g.transpose();
  }
  return top_subspace_of_second_moment(moment, std::min(k, p));
}

linalg::OrthoProjector exact_oracle(const std::vector<VectorXd>& gradient_history, int k) {
  return linalg::OrthoProjector::from_basis(exact_oracle_basis(gradient_history, k));
}

MatrixXd public_data_oracle_basis(const problems::ErmProblem& public_split, const VectorXd& theta,
                                  const OracleConfig& cfg, Rng& rng) {
  const int m = cfg.public_m;
  if (m < cfg.k) throw InsufficientPublicData("public_data_oracle: public_m below target rank");
  if (m > public_split.n())
    throw InsufficientPublicData("public_data_oracle: public split has fewer than m records");

  std::vector<int> indices(public_split.n());
  std::iota(indices.begin(), indices.end(), 0);
  if (m < public_split.n()) {
    // Fisher-Yates prefix: m records without replacement
    for (int i = 0; i < m; ++i)
      std::swap(indices[i], indices[rng.uniform_int(i, public_split.n() - 1)]);
    indices.resize(m);
  }

  const int p = public_split.p();
  MatrixXd moment = MatrixXd::Zero(p, p);
  for (int idx : indices) {
    const VectorXd g = problems::per_example_gradient(public_split, theta, idx);
    moment.noalias() += g * g.transpose();
  }
  moment /= static_cast<double>(m);
  return top_subspace_of_second_moment(moment, std::min(cfg.k, p));
}

linalg::OrthoProjector public_data_oracle(const problems::ErmProblem& public_split,
                                          const VectorXd& theta, const OracleConfig& cfg,
                                          Rng& rng) {
  return linalg::OrthoProjector::from_basis(public_data_oracle_basis(public_split, theta, cfg, rng));
}

MatrixXd corrupted_oracle_basis(const MatrixXd& true_basis, double angle, Rng& rng) {
  if (!(angle >= 0.0 && angle <= 1.5707963267948967))
    throw InvalidParams("corrupted_oracle: angle must be in [0, pi/2]");
  const int p = static_cast<int>(true_basis.rows());
  const int k = static_cast<int>(true_basis.cols());
  if (angle == 0.0 || k == 0) return true_basis;
  if (k >= p)
    throw InvalidParams("corrupted_oracle: full-rank subspace has no complement to rotate into");

  // random unit vector inside the subspace
  VectorXd a(k);
  for (int i = 0; i < k; ++i) a[i] = rng.normal();
  a.normalize();
  const VectorXd u = true_basis * a;

  // random unit vector in the orthogonal complement
  VectorXd w;
  for (int attempt = 0; attempt < 64; ++attempt) {
    VectorXd g(p);
    for (int i = 0; i < p; ++i) g[i] = rng.normal();
    w = g - true_basis * (true_basis.transpose() * g);
    if (w.norm() > 1e-8) break;
  }
  if (w.norm() <= 1e-8) throw NonConvergence("corrupted_oracle: complement draw degenerate");
  w.normalize();

  const VectorXd rotated = std::cos(angle) * u + std::sin(angle) * w;

  // remaining k-1 directions: the subspace component orthogonal to u
  MatrixXd rest = true_basis - u * (u.transpose() * true_basis);
  const MatrixXd tail = linalg::detail::orthonormal_span(rest);

  MatrixXd out(p, tail.cols() + 1);
  out.col(0) = rotated;
  out.rightCols(tail.cols()) = tail;
  return out;
}

linalg::OrthoProjector corrupted_oracle(const linalg::OrthoProjector& true_projector, double angle,
                                        Rng& rng) {
  return linalg::OrthoProjector::from_basis(
      corrupted_oracle_basis(true_projector.basis(), angle, rng));
}

double davis_kahan_bound(const linalg::SymMatrix& a, const linalg::SymMatrix& b, int i, int j) {
  if (a.dim() != b.dim()) throw DimensionMismatch("davis_kahan_bound: dims differ");
  if (i < 1 || i > a.dim() || j < 1 || j > b.dim())
    throw InvalidParams("davis_kahan_bound: eigenvalue index out of range");
  const linalg::SpectralDecomposition sa = linalg::spectral(a);
  const linalg::SpectralDecomposition sb = linalg::spectral(b);
  const double gap = sa.eigenvalues[i - 1] - sb.eigenvalues[j - 1];
  if (!(gap > 0.0)) throw GapViolation("davis_kahan_bound: lambda_i(A) <= lambda_j(B)");
  return linalg::operator_norm(a - b) / gap;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

std::string projector_to_json(const linalg::OrthoProjector& proj) {
  json j;
  j["dim"] = proj.dim();
  j["rank"] = proj.rank();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(proj.dim()) * proj.rank());
  for (int r = 0; r < proj.dim(); ++r)
    for (int c = 0; c < proj.rank(); ++c) flat.push_back(proj.basis()(r, c));
  j["basis"] = flat;
  return j.dump();
}

linalg::OrthoProjector projector_from_json(const std::string& text) {
  const json j = json::parse(text);
  const int dim = j.at("dim").get<int>();
  const int rank = j.at("rank").get<int>();
  const auto flat = j.at("basis").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != dim * rank)
    throw IoError("projector_from_json: basis length mismatch");
  MatrixXd basis(dim, rank);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < rank; ++c) basis(r, c) = flat[static_cast<std::size_t>(r) * rank + c];
  return linalg::OrthoProjector::from_basis(basis);
}

}  // namespace dp::subspace
