#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "mvlab/coefficients.hpp"
#include "mvlab/spectral_space.hpp"

namespace mvlab {

/// Piecewise-constant relaxed control: row m of cell_probs is the kernel
/// m(t, .) on [times[m], times[m+1]). Its time marginal is Lebesgue by
/// construction.
struct RelaxedControlPath {
  std::vector<double> times;  ///< M + 1 cell boundaries
  Eigen::MatrixXd cell_probs; ///< M x K

  Eigen::Index cells() const { return cell_probs.rows(); }
  Eigen::Index actions() const { return cell_probs.cols(); }
  void validate() const;

  static RelaxedControlPath constant(const std::vector<double>& times, const Eigen::VectorXd& probs);
};

/// W_1 on the action space between two probability vectors; closed form for
/// one-dimensional coordinates, exact transport otherwise.
double action_w1(const ActionSpace& actions, const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// sum_m dt_m W_1(row_m(a), row_m(b)).
double vague_distance(const ActionSpace& actions, const RelaxedControlPath& a, const RelaxedControlPath& b);

/// Row `cell` of the kernel; used both to mix the drift and as the argument
/// of sigma-bar.
Eigen::VectorXd sample_action_kernel(const RelaxedControlPath& rc, Eigen::Index cell);

struct DiracControl {
  int action = 0;
};
struct MixtureControl {
  Eigen::VectorXd probs;
};
struct FixedPathControl {
  RelaxedControlPath path;
};
/// Dirac at positive_action when the spatial mean of the state is > 0,
/// else at negative_action.
struct FeedbackSignControl {
  int positive_action = 0;
  int negative_action = 0;
};

using ControlRule = std::variant<DiracControl, MixtureControl, FixedPathControl, FeedbackSignControl>;

/// A named control generator. Rules are pure functions of (cell, state).
struct NamedControl {
  std::string name;
  ControlRule rule;

  /// Probability vector over K actions for output cell `cell` and current
  /// state `y`.
  Eigen::VectorXd evaluate(Eigen::Index cell, const Eigen::VectorXd& y, const SpectralSpace& space, int K) const;
  bool state_dependent() const { return std::holds_alternative<FeedbackSignControl>(rule); }
  void validate(int K, Eigen::Index cells) const;
};

struct ControlFamily {
  std::vector<NamedControl> members;

  const NamedControl& find(const std::string& name) const;
  void validate(int K, Eigen::Index cells) const;
};

/// CSV with a header p0,...,p{K-1} and one row per cell.
std::string control_path_to_csv(const RelaxedControlPath& rc);
RelaxedControlPath control_path_from_csv(const std::string& text, const std::vector<double>& times);

}  // namespace mvlab
