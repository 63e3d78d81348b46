#include "mvlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvlab/transport.hpp"

namespace mvlab {

namespace {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& fa, const Eigen::MatrixXd& fb) {
  Eigen::MatrixXd D(fa.cols(), fb.cols());
  for (Eigen::Index j = 0; j < fb.cols(); ++j)
    for (Eigen::Index i = 0; i < fa.cols(); ++i) D(i, j) = (fa.col(i) - fb.col(j)).norm();
  return D;
}

double pow_cost(double d, double r) { return r == 1.0 ? d : r == 2.0 ? d * d : std::pow(d, r); }

// Per-path data reused across all pairs: V-weighted sine coefficients per
// time and the grid values for the Y-term.
struct PathFeatures {
  std::vector<Eigen::MatrixXd> vcoef;  // J x (M+1) per path
  const Ensemble* e = nullptr;
};

PathFeatures features(const SpectralSpace& space, const Ensemble& e) {
  PathFeatures f;
  f.e = &e;
  const Eigen::VectorXd w = space.weights(Space::V).array().sqrt();
  f.vcoef.reserve(e.size());
  for (const auto& p : e.paths) f.vcoef.push_back(w.asDiagonal() * space.to_sine(p.path.states));
  return f;
}

double feature_distance(const PathMetric& pm, const PathFeatures& fa, std::size_t i, const PathFeatures& fb,
                        std::size_t j) {
  const auto& A = fa.e->paths[i];
  const auto& B = fb.e->paths[j];
  const Eigen::Index M1 = A.path.states.cols();
  const double h = pm.space.h(), q = pm.space.q();
  const double sup_v = (fa.vcoef[i] - fb.vcoef[j]).colwise().norm().maxCoeff();
  Eigen::VectorXd yterm(M1);
  for (Eigen::Index m = 0; m < M1; ++m) {
    const double s = h * abs_pow_sum((A.path.states.col(m) - B.path.states.col(m)).eval(), q);
    yterm[m] = pm.alpha == q ? s : std::pow(s, pm.alpha / q);
  }
  const double integral = std::max(0.0, trapezoid(A.path.times, yterm));
  double vague = 0.0;
  const auto& ta = A.control.times;
  for (Eigen::Index m = 0; m < A.control.cells(); ++m) {
    const auto ra = A.control.cell_probs.row(m);
    const auto rb = B.control.cell_probs.row(m);
    if (ra == rb) continue;
    vague += (ta[m + 1] - ta[m]) * action_w1(pm.actions, ra.transpose(), rb.transpose());
  }
  return sup_v + std::pow(integral, 1.0 / pm.alpha) + vague;
}

}  // namespace

EmpiricalFieldMeasure empirical_state_measure(const Ensemble& e, Eigen::Index t_index) {
  return EmpiricalFieldMeasure::uniform(e.slice(t_index));
}

Eigen::MatrixXd ground_features(const SpectralSpace& space, const Eigen::MatrixXd& fields, Space ground) {
  if (ground == Space::Y) throw UsageError("wasserstein ground space must be H, X or V");
  const Eigen::VectorXd w = space.weights(ground).array().sqrt();
  return w.asDiagonal() * space.to_sine(fields);
}

double wasserstein_fields(const SpectralSpace& space, const EmpiricalFieldMeasure& mu,
                          const EmpiricalFieldMeasure& nu, double r, Space ground) {
  if (!(r >= 1)) throw UsageError("wasserstein order r must be >= 1");
  if (mu.size() == 0 || nu.size() == 0) throw UsageError("wasserstein of an empty measure");
  const Eigen::MatrixXd D =
      pairwise_distances(ground_features(space, mu.atoms(), ground), ground_features(space, nu.atoms(), ground));
  const Eigen::MatrixXd C = D.unaryExpr([r](double d) { return pow_cost(d, r); });
  const double cost = solve_transport<double>(mu.weights(), nu.weights(), C).cost;
  return std::pow(std::max(0.0, cost), 1.0 / r);
}

double PathMetric::distance(const ControlledPath& a, const ControlledPath& b) const {
  if (!same_grid(a.path.times, b.path.times)) throw UsageError("path metric: time grids differ");
  return path_metric(space, a.path, b.path, alpha) + vague_distance(actions, a.control, b.control);
}

Eigen::MatrixXd PathMetric::cost_matrix(const Ensemble& a, const Ensemble& b) const {
  if (a.size() == 0 || b.size() == 0) throw UsageError("wasserstein_paths: empty ensemble");
  if (!same_grid(a.times(), b.times())) throw UsageError("wasserstein_paths: time grids differ");
  if (a.paths.front().control.actions() != b.paths.front().control.actions())
    throw UsageError("wasserstein_paths: action spaces differ");
  const PathFeatures fa = features(space, a);
  const PathFeatures fb = features(space, b);
  const auto na = static_cast<Eigen::Index>(a.size()), nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd C(na, nb);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j)
      C(i, j) = pow_cost(feature_distance(*this, fa, static_cast<std::size_t>(i), fb, static_cast<std::size_t>(j)),
                         rho);
  return C;
}

double wasserstein_paths(const PathMetric& metric, const Ensemble& a, const Ensemble& b) {
  const Eigen::MatrixXd C = metric.cost_matrix(a, b);
  const Eigen::VectorXd wa = Eigen::VectorXd::Constant(C.rows(), 1.0 / static_cast<double>(C.rows()));
  const Eigen::VectorXd wb = Eigen::VectorXd::Constant(C.cols(), 1.0 / static_cast<double>(C.cols()));
  if (C.rows() == 1 || C.cols() == 1) {
    const double cost = C.rows() == 1 ? C.row(0).mean() : C.col(0).mean();
    return std::pow(cost, 1.0 / metric.rho);
  }
  const double cost = solve_transport<double>(wa, wb, C).cost;
  return std::pow(std::max(0.0, cost), 1.0 / metric.rho);
}

OuterLaw OuterLaw::uniform(const std::vector<const Ensemble*>& parts) {
  OuterLaw o;
  o.components = parts;
  o.weights.assign(parts.size(), 1.0 / static_cast<double>(parts.size()));
  return o;
}

void OuterLaw::validate() const {
  if (components.empty() || components.size() != weights.size())
    throw UsageError("outer law needs matching nonempty weights and components");
  double s = 0.0;
  for (double w : weights) {
    if (w < 0) throw UsageError("outer law weights must be nonnegative");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) throw UsageError("outer law weights must sum to 1");
}

double wasserstein_outer(const PathMetric& metric, const OuterLaw& P, const OuterLaw& Q) {
  P.validate();
  Q.validate();
  const auto n = static_cast<Eigen::Index>(P.components.size());
  const auto m = static_cast<Eigen::Index>(Q.components.size());
  Eigen::MatrixXd C(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      C(i, j) = pow_cost(wasserstein_paths(metric, *P.components[i], *Q.components[j]), metric.rho);
  const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(P.weights.data(), n);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(Q.weights.data(), m);
  const double cost = solve_transport<double>(a, b, C).cost;
  return std::pow(std::max(0.0, cost), 1.0 / metric.rho);
}

double hausdorff(const Eigen::MatrixXd& distances) {
  if (distances.size() == 0) throw UsageError("hausdorff of an empty set");
  const double ab = distances.rowwise().minCoeff().maxCoeff();
  const double ba = distances.colwise().minCoeff().maxCoeff();
  return std::max(ab, ba);
}

double hausdorff(const PathMetric& metric, const LawSet& A, const LawSet& B) {
  if (A.members.empty() || B.members.empty()) throw UsageError("hausdorff of an empty set");
  Eigen::MatrixXd D(static_cast<Eigen::Index>(A.members.size()), static_cast<Eigen::Index>(B.members.size()));
  for (std::size_t i = 0; i < A.members.size(); ++i)
    for (std::size_t j = 0; j < B.members.size(); ++j)
      D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          wasserstein_outer(metric, A.members[i], B.members[j]);
  return hausdorff(D);
}

}  // namespace mvlab
