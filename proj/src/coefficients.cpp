#include "mvlab/coefficients.hpp"

#include <cmath>

namespace mvlab {

ActionSpace ActionSpace::from_scalars(const std::vector<double>& values) {
  ActionSpace a;
  a.coords.resize(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) a.coords(0, static_cast<Eigen::Index>(k)) = values[k];
  a.validate();
  return a;
}

void ActionSpace::validate() const {
  if (coords.cols() < 1 || coords.rows() < 1) throw ConfigError("action space must contain at least one action");
  if (!coords.allFinite()) throw ConfigError("action coordinates must be finite");
}

EmpiricalFieldMeasure::EmpiricalFieldMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.cols() == 0) throw UsageError("empirical measure needs at least one atom");
  if (weights_.size() != atoms_.cols()) throw UsageError("measure weights and atoms disagree in count");
  if ((weights_.array() < 0).any()) throw UsageError("measure weights must be nonnegative");
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw UsageError("measure weights must sum to 1");
  mean_ = atoms_ * weights_;
}

EmpiricalFieldMeasure EmpiricalFieldMeasure::uniform(Eigen::MatrixXd atoms) {
  const Eigen::Index n = atoms.cols();
  if (n == 0) throw UsageError("empirical measure needs at least one atom");
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  // Exact mean for the uniform case: sum then divide.
  EmpiricalFieldMeasure m(std::move(atoms), std::move(w));
  m.mean_ = m.atoms_.rowwise().sum() / static_cast<double>(n);
  return m;
}

EmpiricalFieldMeasure EmpiricalFieldMeasure::dirac(const Eigen::VectorXd& x) {
  return EmpiricalFieldMeasure(x, Eigen::VectorXd::Ones(1));
}

double EmpiricalFieldMeasure::moment(const SpectralSpace& space, double r) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < atoms_.cols(); ++i) acc += weights_[i] * std::pow(space.norm(atoms_.col(i), Space::H), r);
  return std::pow(acc, 1.0 / r);
}

Eigen::VectorXd CoefficientSet::drift_mixed(const Eigen::VectorXd& nu, double t, const Eigen::VectorXd& y,
                                            const EmpiricalFieldMeasure& mu) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(y.size());
  for (int k = 0; k < actions_.size(); ++k)
    if (nu[k] != 0.0) out += nu[k] * drift(k, t, y, mu);
  return out;
}

Eigen::VectorXd CoefficientSet::sigma_bar(const Eigen::VectorXd& nu, double t, const Eigen::VectorXd& y,
                                          const EmpiricalFieldMeasure& mu) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(y.size());
  for (int k = 0; k < actions_.size(); ++k)
    if (nu[k] != 0.0) acc += nu[k] * sigma(k, t, y, mu).array().square().matrix();
  return acc.array().sqrt();
}

void PorousMediaParams::validate() const {
  if (!(sigma0 >= 0)) throw ConfigError("coefficients.sigma0 must be >= 0");
  if (!(tau > 0.5)) throw ConfigError("coefficients.tau must be > 1/2 (Hilbert-Schmidt noise)");
  if (!(bump_width > 0)) throw ConfigError("coefficients.bump_width must be > 0");
}

PorousMedia::PorousMedia(SpectralSpace space, ActionSpace actions, PorousMediaParams params)
    : CoefficientSet(std::move(space), std::move(actions)), params_(params) {
  const int J = space_.size();
  params_.validate();
  actions_.validate();
  const double center = space_.length() / 2;
  const double w = params_.bump_width;
  Eigen::VectorXd bump(J);
  for (int j = 0; j < J; ++j) {
    const double d = space_.grid()[j] - center;
    bump[j] = std::exp(-d * d / (2 * w * w));
  }
  for (int k = 0; k < actions_.size(); ++k)
    control_fields_.push_back(params_.control_scale * actions_.coordinate(k) * bump);
  sigma_ = Eigen::VectorXd::Zero(J);
  for (int j = 0; j < J; ++j) sigma_[j] = params_.sigma0 * std::pow(double(j + 1), -params_.tau);
}

Eigen::VectorXd PorousMedia::porous_term(const Eigen::VectorXd& y) const {
  Eigen::VectorXd lap = space_.laplacian(signed_pow(y, space_.q() - 1.0));
  if (params_.anti_diffusion) lap = -lap;
  return lap;
}

Eigen::VectorXd PorousMedia::drift_with_mean(const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& mean) const {
  Eigen::VectorXd out = porous_term(y);
  if (params_.interaction != 0.0) out += params_.interaction * (y - mean);
  for (int k = 0; k < actions_.size(); ++k)
    if (nu[k] != 0.0) out += nu[k] * control_fields_[k];
  return out;
}

Eigen::VectorXd PorousMedia::drift(int action, double, const Eigen::VectorXd& y,
                                   const EmpiricalFieldMeasure& mu) const {
  if (action < 0 || action >= actions_.size()) throw UsageError("action index out of range");
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(actions_.size());
  nu[action] = 1.0;
  return drift_with_mean(nu, y, mu.mean());
}

Eigen::VectorXd PorousMedia::drift_mixed(const Eigen::VectorXd& nu, double, const Eigen::VectorXd& y,
                                         const EmpiricalFieldMeasure& mu) const {
  return drift_with_mean(nu, y, mu.mean());
}

}  // namespace mvlab
