#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "mvlab/coefficients.hpp"
#include "mvlab/controls.hpp"
#include "mvlab/rng.hpp"
#include "mvlab/spectral_space.hpp"

namespace mvlab {

enum class DtPolicy { Fixed, Adaptive };

struct SimConfig {
  int n_particles = 32;
  int M_steps = 50;  ///< output cells on [0, T]
  DtPolicy dt_policy = DtPolicy::Adaptive;
  double base_dt = 1e-3;
  int noise_modes = 0;  ///< leading sine modes driven by noise; 0 means all J
  std::uint64_t rng_seed = 1;
  std::uint64_t experiment = 0;  ///< stream lane
  std::uint64_t replicate = 0;
  std::optional<double> cutoff_m;
  double blowup_ceiling = 1e6;  ///< bound on ||Y||_H

  void validate(int J) const;
  StreamKey stream_key() const { return StreamKey{rng_seed, experiment, replicate, 0, 0}; }
};

/// min(base_dt, 0.25 h^2 / ((q - 1) max(1, y_max_abs)^{q-2})).
double adaptive_dt(double y_max_abs, const SimConfig& cfg, const SpectralSpace& space);

/// Smooth cutoff: 1 on [0, m], 0 on [2m, inf).
double cutoff(double r, double m);

struct ControlledPath {
  PathSample path;
  RelaxedControlPath control;
};

struct SimDiagnostics {
  std::size_t substeps = 0;
  double min_dt = 0.0;
  double max_dt = 0.0;
  double noise_tail = 0.0;  ///< sum_{j > noise_modes} s_j^2, the truncated trace
};

/// n controlled paths on a shared output grid; the empirical law S_n.
struct Ensemble {
  std::vector<ControlledPath> paths;
  Eigen::VectorXd init_x;
  std::string config_hash;
  std::uint64_t seed = 0;
  SimDiagnostics diagnostics;

  std::size_t size() const { return paths.size(); }
  const std::vector<double>& times() const { return paths.front().path.times; }
  Eigen::Index steps() const { return static_cast<Eigen::Index>(times().size()) - 1; }
  /// J x n matrix of all particle fields at output index m.
  Eigen::MatrixXd slice(Eigen::Index m) const;
  /// Copy with particles reordered by `perm`.
  Ensemble permuted(const std::vector<std::size_t>& perm) const;
};

/// Per-time particle clouds Q_t of a frozen measure flow together with
/// their means. Between output times the clouds are interpolated index-wise.
struct MeasureFlow {
  std::vector<double> times;
  std::vector<EmpiricalFieldMeasure> clouds;
  Eigen::MatrixXd means;  ///< J x (M + 1)

  static MeasureFlow from_ensemble(const Ensemble& e);
  /// Cloud at time t, linear in t between grid points.
  EmpiricalFieldMeasure at(double t) const;
  Eigen::VectorXd mean_at(double t) const;
};

/// The n-particle system: the measure argument is the empirical law of the
/// current particle states.
Ensemble simulate_particles(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                            const Eigen::VectorXd& x0);

/// n_particles independent copies driven by a frozen flow.
Ensemble simulate_frozen(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                         const Eigen::VectorXd& x0, const MeasureFlow& flow);

/// Bound (1 + 2||x||^{2p}) exp{6 lambda p T (1 + 18 p)} in log form.
double log_moment_bound(double x_norm, double p, const ModelConstants& c);

/// log of the j-hat lower bound.
double log_jhat(double x_norm, const ModelConstants& c);

struct MomentLine {
  double p = 1.0;
  double empirical = 0.0;  ///< (1/n) sum_k sup_m ||Y^k_m||_H^{2p}
  double log_bound = 0.0;
  bool pass = false;
};

struct MomentReport {
  std::vector<MomentLine> lines;
  double integral_n = 0.0;       ///< (1/n) sum_k int N(Y^k) dt
  double integral_n_beta = 0.0;  ///< same with N_{beta/2+1}
  double j_functional = 0.0;     ///< E[sup ||X||^{2 eta} + int (N + N_{beta/2+1})]
  double log_jhat = 0.0;
  bool j_pass = false;

  bool pass() const;
  nlohmann::json to_json() const;
};

MomentReport moment_report(const SpectralSpace& space, const Ensemble& e, const std::vector<double>& p_list,
                           const ModelConstants& constants);

}  // namespace mvlab
