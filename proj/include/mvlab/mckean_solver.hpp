#pragma once

#include <vector>

#include "json.hpp"
#include "mvlab/particle_sim.hpp"

namespace mvlab {

struct PicardOptions {
  int n_cloud = 1024;
  int max_iter = 20;
  double tol = 1e-6;
  /// Flow cells per output cell; the frozen flow is stored on this finer grid.
  int flow_refine = 8;
};

struct PicardResult {
  MeasureFlow flow;  ///< on the refined grid
  Ensemble ensemble; ///< on the output grid of the SimConfig
  std::vector<double> residuals;
  bool converged = false;

  /// Geometric fit of consecutive residual ratios (median of r_{i+1}/r_i).
  double contraction_ratio() const;
  /// Machine-readable record; contains a warning when not converged.
  nlohmann::json to_json() const;
};

/// sup_t w_2^X(a_t, b_t) over the shared grid, exact. Uses the index
/// coupling as an upper bound to skip times that cannot raise the sup.
double flow_residual(const SpectralSpace& space, const MeasureFlow& a, const MeasureFlow& b);

/// Keeps every factor-th output time; control rows are averaged.
Ensemble downsample(const Ensemble& e, int factor);

/// Fixed point of mu -> Law(X | frozen mu) with common random numbers.
PicardResult picard_mckean(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                           const Eigen::VectorXd& x0, const PicardOptions& opts);

}  // namespace mvlab
