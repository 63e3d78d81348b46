#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvlab/coefficients.hpp"
#include "mvlab/controls.hpp"
#include "mvlab/particle_sim.hpp"
#include "mvlab/spectral_space.hpp"

namespace mvlab {

/// X_n at a time slice: the uniform measure on the n particle fields.
EmpiricalFieldMeasure empirical_state_measure(const Ensemble& e, Eigen::Index t_index);

/// Ground-space features whose Euclidean distances are the ground norm:
/// sqrt(w_k) c_k in the sine basis.
Eigen::MatrixXd ground_features(const SpectralSpace& space, const Eigen::MatrixXd& fields, Space ground);

/// W_r between finitely supported measures on H with ground norm of
/// H, X or V; exact transport.
double wasserstein_fields(const SpectralSpace& space, const EmpiricalFieldMeasure& mu,
                          const EmpiricalFieldMeasure& nu, double r, Space ground);

/// Metric context on Theta = Omega x M: ground cost (d + r_vague)^rho.
struct PathMetric {
  const SpectralSpace& space;
  const ActionSpace& actions;
  double alpha;  ///< exponent of the Y-integral in d
  double rho;

  /// d + vague distance of one controlled-path pair.
  double distance(const ControlledPath& a, const ControlledPath& b) const;
  /// n_a x n_b matrix of (d + r)^rho.
  Eigen::MatrixXd cost_matrix(const Ensemble& a, const Ensemble& b) const;
};

/// w_rho^Theta between the empirical laws S_n of two ensembles.
double wasserstein_paths(const PathMetric& metric, const Ensemble& a, const Ensemble& b);

/// Finite mixture of ensembles: an element of P(P(Theta)).
struct OuterLaw {
  std::vector<double> weights;
  std::vector<const Ensemble*> components;

  static OuterLaw dirac(const Ensemble& e) { return OuterLaw{{1.0}, {&e}}; }
  static OuterLaw uniform(const std::vector<const Ensemble*>& parts);
  void validate() const;
};

/// Nested Wasserstein: ground cost wasserstein_paths^rho between components.
double wasserstein_outer(const PathMetric& metric, const OuterLaw& P, const OuterLaw& Q);

struct LawSet {
  std::vector<std::string> tags;
  std::vector<OuterLaw> members;
};

/// Hausdorff distance from a precomputed |A| x |B| distance matrix.
double hausdorff(const Eigen::MatrixXd& distances);

double hausdorff(const PathMetric& metric, const LawSet& A, const LawSet& B);

}  // namespace mvlab
