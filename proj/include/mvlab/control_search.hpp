#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvlab/mckean_solver.hpp"
#include "mvlab/measures.hpp"

namespace mvlab {

/// A functional psi on P(Theta), evaluated on the empirical law of an
/// ensemble, with a declared growth bound |psi| <= C (1 + m_alpha) where
/// m_alpha = (1/n) sum_k sup_t ||Y^k_t||_H^alpha.
struct TestFunctional {
  std::string name;
  double growth_constant = 1.0;
  double growth_alpha = 2.0;
  std::function<double(const SpectralSpace&, const Ensemble&)> eval;
  /// Per-particle contributions when psi is an expectation; empty otherwise.
  std::function<Eigen::VectorXd(const SpectralSpace&, const Ensemble&)> per_particle;

  /// Evaluates psi and enforces the growth bound (AssertionFailure).
  double operator()(const SpectralSpace& space, const Ensemble& e) const;
};

double ensemble_moment(const SpectralSpace& space, const Ensemble& e, double alpha);

TestFunctional zero_functional();
/// E[min(||X_T||_H^2, clip^2)].
TestFunctional terminal_moment(double clip);
/// E[int <X_s, phi>_H ds + kappa int int cost(f) M(ds, df)]; phi on the grid,
/// cost per action.
TestFunctional running_cost(const SpectralSpace& space, const Eigen::VectorXd& phi, const Eigen::VectorXd& cost,
                            double kappa);

struct ValueCell {
  double mean = 0.0;
  double se = 0.0;
  int replicates = 0;
};

/// One n (0 is the mean-field limit, computed by Picard).
struct ValueRow {
  int n = 0;
  std::vector<ValueCell> cells;  ///< one per family member
  int argmax = 0;
  double value = 0.0;
};

struct ValueReport {
  std::vector<std::string> controls;
  std::vector<ValueRow> rows;  ///< n_list order
  ValueRow limit;
  ValueRow proxy;  ///< n = 4 max(n_list)
  std::string psi;
  std::uint64_t seed = 0;

  const ValueRow& row(int n) const;
  /// |V^n - V^0| and the pooled standard error sqrt(se_n^2 + se_0^2) of the
  /// maximizing cells.
  double gap(int n) const;
  double gap_se(int n) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct ValueOptions {
  std::vector<int> n_list{8, 32, 128};
  int replicates = 8;
  PicardOptions picard;
  bool proxy = true;
};

ValueReport value_function(const CoefficientSet& cs, const ControlFamily& family, const SimConfig& cfg,
                           const Eigen::VectorXd& x0, const TestFunctional& psi, const ValueOptions& opts);

/// Members whose value is at least V^n - epsilon, in declaration order.
std::vector<std::string> epsilon_optimal(const ValueReport& report, int n, double epsilon);

struct ChaosRow {
  int n = 0;
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> replicates;
  std::vector<double> slice_w2;  ///< mean over replicates of w_2^X at each output time
};

struct ChaosTable {
  std::vector<ChaosRow> rows;
  double baseline = 0.0;  ///< distance between two independent reference ensembles
  double fitted_rate = 0.0;  ///< r in mean ~ c n^{-r}, least squares in log-log
  std::uint64_t seed = 0;

  /// Each mean is at most the previous mean plus one standard error of the
  /// pair.
  bool decreasing_within_se() const;
  double last_over_first() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct ChaosOptions {
  std::vector<int> n_list{8, 32, 128, 512};
  int replicates = 4;
  double rho = 2.0;
};

/// n-particle ensembles against a reference ensemble (typically the Picard
/// output); `independent` is a second reference with other seeds, used for
/// the baseline. Pass nullptr to skip the baseline.
ChaosTable chaos_experiment(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                            const Eigen::VectorXd& x0, const Ensemble& reference, const Ensemble* independent,
                            const ChaosOptions& opts);

struct HausdorffOptions {
  std::vector<int> n_list{8, 32, 128};
  int replicates = 4;
  double rho = 2.0;
  PicardOptions picard;
};

struct HausdorffTable {
  /// distances[x][i]: h(LawSet_n(x), LawSet_ref(x)) for n = n_list[i].
  std::vector<int> n_list;
  std::vector<std::vector<double>> distances;
  /// Continuity probes: ||x - x'||_H and h(LawSet_ref(x), LawSet_ref(x')).
  std::vector<double> probe_norms;
  std::vector<double> probe_distances;

  bool decreasing(double slack) const;
  bool continuity_monotone() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// LawSet_n(x) holds one outer law per family member: the uniform mixture
/// of `replicates` independent n-particle ensembles. LawSet_ref(x) holds the
/// Dirac outer law of each member's Picard ensemble. Probe pairs are
/// (probes[i].first, probes[i].second).
HausdorffTable hausdorff_experiment(const CoefficientSet& cs, const ControlFamily& family, const SimConfig& cfg,
                                    const std::vector<Eigen::VectorXd>& x_list,
                                    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probes,
                                    const HausdorffOptions& opts);

}  // namespace mvlab
