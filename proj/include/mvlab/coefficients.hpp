#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "mvlab/spectral_space.hpp"

namespace mvlab {

/// Finite action space F; column k of `coords` embeds action f_k.
struct ActionSpace {
  Eigen::MatrixXd coords;

  static ActionSpace from_scalars(const std::vector<double>& values);

  int size() const { return static_cast<int>(coords.cols()); }
  double coordinate(int k) const { return coords(0, k); }
  double distance(int a, int b) const { return (coords.col(a) - coords.col(b)).norm(); }
  void validate() const;
};

/// Finitely supported measure on H; columns of `atoms` are fields. The
/// mean is computed once at construction.
class EmpiricalFieldMeasure {
 public:
  EmpiricalFieldMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights);

  static EmpiricalFieldMeasure uniform(Eigen::MatrixXd atoms);
  static EmpiricalFieldMeasure dirac(const Eigen::VectorXd& x);

  Eigen::Index size() const { return atoms_.cols(); }
  const Eigen::MatrixXd& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  /// ||mu||_{r,H} = (sum_i w_i ||z_i||_H^r)^{1/r}, reference point 0.
  double moment(const SpectralSpace& space, double r) const;

 private:
  Eigen::MatrixXd atoms_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd mean_;
};

/// Abstract coefficients (b, sigma, sigma-bar). Volatilities are diagonal in
/// the sine basis: sigma e_k = s_k e_k, represented by the multipliers s.
class CoefficientSet {
 public:
  explicit CoefficientSet(SpectralSpace space, ActionSpace actions)
      : space_(std::move(space)), actions_(std::move(actions)) {}
  virtual ~CoefficientSet() = default;

  const SpectralSpace& space() const { return space_; }
  const ActionSpace& actions() const { return actions_; }

  virtual Eigen::VectorXd drift(int action, double t, const Eigen::VectorXd& y,
                                const EmpiricalFieldMeasure& mu) const = 0;

  /// int b(f, t, y, mu) nu(df) for a probability vector nu over actions.
  virtual Eigen::VectorXd drift_mixed(const Eigen::VectorXd& nu, double t, const Eigen::VectorXd& y,
                                      const EmpiricalFieldMeasure& mu) const;

  virtual Eigen::VectorXd sigma(int action, double t, const Eigen::VectorXd& y,
                                const EmpiricalFieldMeasure& mu) const = 0;

  /// Nonnegative root of sum_k nu_k sigma sigma^*(f_k, ...); exact for
  /// diagonal operators.
  virtual Eigen::VectorXd sigma_bar(const Eigen::VectorXd& nu, double t, const Eigen::VectorXd& y,
                                    const EmpiricalFieldMeasure& mu) const;

  /// True when sigma does not depend on (f, t, y, mu).
  virtual bool constant_sigma() const { return false; }

 protected:
  SpectralSpace space_;
  ActionSpace actions_;
};

struct PorousMediaParams {
  double sigma0 = 0.5;
  double tau = 1.0;         ///< s_j = sigma0 j^{-tau}, tau > 1/2
  double bump_width = 0.1;  ///< c(f)(u) = f exp(-(u - L/2)^2 / (2 w^2))
  double interaction = 1.0; ///< scale of y - mean(mu); 0 switches it off
  double control_scale = 1.0;
  bool anti_diffusion = false;  ///< flips the sign of the porous term (not monotone)

  void validate() const;
};

/// b(f, t, y, mu) = Delta_h Phi_q(y) + (y - int z mu(dz)) + c(f) with
/// Phi_q(s) = |s|^{q-2} s, and a constant diagonal sigma.
class PorousMedia final : public CoefficientSet {
 public:
  PorousMedia(SpectralSpace space, ActionSpace actions, PorousMediaParams params);

  const PorousMediaParams& params() const { return params_; }

  /// Delta_h Phi_q(y), the porous-media part of the drift.
  Eigen::VectorXd porous_term(const Eigen::VectorXd& y) const;
  const Eigen::VectorXd& control_field(int action) const { return control_fields_[action]; }
  const Eigen::VectorXd& sigma_multipliers() const { return sigma_; }

  Eigen::VectorXd drift(int action, double t, const Eigen::VectorXd& y,
                        const EmpiricalFieldMeasure& mu) const override;
  Eigen::VectorXd drift_mixed(const Eigen::VectorXd& nu, double t, const Eigen::VectorXd& y,
                              const EmpiricalFieldMeasure& mu) const override;
  /// Same as drift_mixed but with the interaction mean supplied directly.
  Eigen::VectorXd drift_with_mean(const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& mean) const;
  Eigen::VectorXd sigma(int, double, const Eigen::VectorXd&, const EmpiricalFieldMeasure&) const override {
    return sigma_;
  }
  bool constant_sigma() const override { return true; }

 private:
  PorousMediaParams params_;
  std::vector<Eigen::VectorXd> control_fields_;
  Eigen::VectorXd sigma_;
};

/// Hilbert-Schmidt norm squared of a sine-diagonal operator into H.
inline double hs_norm_sq(const Eigen::VectorXd& s) { return s.squaredNorm(); }

// ---------------------------------------------------------------------------
// Randomized condition checkers

/// Distribution of sampled states: Gaussian sine coefficients
/// scale * xi_j * j^{-decay}; measures are uniform mixtures of 1..max_atoms
/// such fields.
struct FieldSampler {
  double decay = 1.5;
  double scale = 1.0;
  int max_atoms = 8;
};

struct InequalityReport {
  std::string name;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;           ///< min over samples of rhs - lhs
  double min_feasible_constant = 0.0;  ///< smallest constant with no violation
};

struct ConditionReport {
  std::string condition;
  double constant_used = 0.0;
  std::uint64_t seed = 0;
  std::vector<InequalityReport> inequalities;
  /// Largest sampled |<b(mu) - b(mu'), v>| / w_rho^V(mu, mu'); logged only.
  double continuity_modulus = 0.0;

  std::size_t total_violations() const;
  double min_feasible_constant() const;
  nlohmann::json to_json() const;
};

struct CheckOptions {
  FieldSampler sampler;
  bool include_n_term = true;  ///< drop -N(w) from the coercivity bound when false
};

/// Coercivity, drift growth and diffusion growth with constant `lambda`.
ConditionReport check_condition_main1(const CoefficientSet& cs, const ModelConstants& constants, double lambda,
                                      std::size_t samples, std::uint64_t seed, const CheckOptions& opts = {});

/// Y*-growth, weak monotonicity and sigma-bar Lipschitz bound with constant C.
/// The measure term is w_2^X(mu, mu*)^2.
ConditionReport check_condition_main2(const CoefficientSet& cs, const ModelConstants& constants, double C,
                                      std::size_t samples, std::uint64_t seed, const CheckOptions& opts = {});

struct CalibratedConstants {
  double lambda = 0.0;
  double C = 0.0;
};

/// Smallest feasible (lambda, C) over a calibration sample, times `margin`.
CalibratedConstants calibrate_constants(const CoefficientSet& cs, const ModelConstants& constants,
                                        std::size_t samples, std::uint64_t seed, double margin,
                                        const CheckOptions& opts = {});

/// (Phi_q(t) - Phi_q(s))(t - s) over random pairs; returns the number of
/// negative products.
std::size_t scalar_monotonicity_violations(double q, std::size_t pairs, std::uint64_t seed);

}  // namespace mvlab
