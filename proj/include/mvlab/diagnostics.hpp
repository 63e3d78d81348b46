#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mvlab/mckean_solver.hpp"
#include "mvlab/measures.hpp"

namespace mvlab {

/// Scalar test function g with bounded g, g', g''. Linear is unbounded and
/// only meant for algebra checks.
struct ScalarTest {
  enum class Kind { Bump, SaturatedQuadratic, Linear };
  Kind kind = Kind::Bump;
  double center = 0.0;  ///< bump centre
  double width = 1.0;   ///< bump support radius, or saturation radius R
  double offset = 0.0;  ///< added to g; cancels in every increment

  /// Bump: exp(1 - 1 / (1 - u^2)) with u = (x - c) / w on |u| < 1.
  /// Saturated quadratic: R^2 x^2 / (R^2 + x^2), which is x^2 + O(x^4 / R^2).
  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;

 private:
  double shape(double x) const;
};

/// Weight psi_s on the path up to time s.
enum class PastWeight { One, Zero, TanhFirstMode };

struct GeneratorSpec {
  std::string id;
  ScalarTest g;
  Eigen::VectorXd y;  ///< test field on the grid
  Eigen::Index s_index = 0;
  Eigen::Index t_index = 1;
  PastWeight weight = PastWeight::TanhFirstMode;
};

/// ||sigma^* y||^2 = sum_{j <= noise_modes} s_j^2 <y, e_j>^2 (0 modes = all).
double noise_quadratic(const Eigen::VectorXd& s, const SpectralSpace& space, const Eigen::VectorXd& y,
                       int noise_modes);

/// L_{g,y} at (nu, t, v, mu): g'(<v,y>) <b,y> + g''(<v,y>) ||sigma^* y||^2 / 2.
double generator_eval(const GeneratorSpec& spec, const CoefficientSet& cs, const Eigen::VectorXd& nu, double t,
                      const Eigen::VectorXd& v, const EmpiricalFieldMeasure& mu, int noise_modes = 0);

/// The built-in panel: two bumps and two saturated quadratics against
/// e_1, e_2, a smooth combination and a localized bump field, on the
/// window [s_index, t_index] of the output grid.
std::vector<GeneratorSpec> builtin_panel(const SpectralSpace& space, Eigen::Index s_index, Eigen::Index t_index);

struct ResidualEstimate {
  double estimate = 0.0;
  double se = 0.0;
};

/// E[(M_t - M_s) psi_s] over the particles, compensator by left-endpoint
/// quadrature on the output grid. The ensemble must have been simulated with
/// one Euler step per output cell. flow == nullptr uses X_n(X_t) of the
/// ensemble itself (the n-particle generators); otherwise flow must share
/// the output grid.
ResidualEstimate martingale_residual(const GeneratorSpec& spec, const CoefficientSet& cs, const Ensemble& e,
                                     const MeasureFlow* flow, int noise_modes);

struct PanelRow {
  std::string id;
  double estimate = 0.0;
  double se = 0.0;
  double bias = 0.0;  ///< 2 |r(dt) - r(dt/2)|, the first-order extrapolated dt bias
  double band = 0.0;  ///< 3 se + bias
  bool pass = false;
};

struct PanelReport {
  std::string source;  ///< "particles" or "mean_field"
  std::vector<PanelRow> rows;
  bool pass() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

enum class ResidualSource { Particles, MeanField };

/// Simulates at output grid step dt = T / steps and at dt / 2 (one Euler step
/// per cell in both) and evaluates the panel with its band. Window indices in
/// the specs refer to the coarse grid; they are doubled for the fine run.
PanelReport martingale_panel(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                             const Eigen::VectorXd& x0, const std::vector<GeneratorSpec>& specs, int steps,
                             ResidualSource source, const PicardOptions& picard);

/// |r(dt)| / |r(dt/2)| per spec for deterministic dynamics: one particle,
/// coefficients as given (sigma0 should be 0).
std::vector<double> dt_halving_ratios(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                                      const Eigen::VectorXd& x0, const std::vector<GeneratorSpec>& specs, int steps);

}  // namespace mvlab
