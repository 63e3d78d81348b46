#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "mvlab/control_search.hpp"
#include "mvlab/controls.hpp"
#include "mvlab/diagnostics.hpp"
#include "mvlab/heat_oracle.hpp"

namespace mvlab {

/// Read-only view of a YAML map that records which keys were consumed, so
/// leftovers can be rejected. Errors name the key path and line.
class StrictMap {
 public:
  StrictMap(const YAML::Node& node, std::string path);
  StrictMap(const StrictMap&) = delete;
  StrictMap& operator=(const StrictMap&) = delete;

  bool has(const std::string& key) const;
  template <typename T>
  T get(const std::string& key, const T& fallback);
  template <typename T>
  T require(const std::string& key);
  YAML::Node node(const std::string& key);
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  int line() const { return node_.Mark().line + 1; }
  /// Throws ConfigError on unconsumed keys.
  void finish() const;

 private:
  template <typename T>
  T convert(const std::string& key, const YAML::Node& v) const;

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

/// Model and numerics shared by experiments; experiments may override any
/// section.
struct ModelSetup {
  SpaceConfig space;
  PorousMediaParams coefficients;
  std::vector<double> actions{-1.0, 0.0, 1.0};
  std::optional<double> C;  ///< monotonicity constant; calibrated when absent
  SimConfig sim;
  PicardOptions picard;
  std::vector<double> initial_modes{0.7};  ///< x0 = sum_k a_k e_k
  ControlFamily controls;

  PorousMedia build() const;
  Eigen::VectorXd initial_state(const SpectralSpace& space) const;
  Eigen::VectorXd state_from_modes(const SpectralSpace& space, const std::vector<double>& modes) const;
};

struct ConditionCheckParams {
  std::size_t samples = 10000;
  std::size_t calibration_samples = 2000;
  double margin = 2.0;
  bool adversarial = true;
};

struct HeatOracleParams {
  HeatOracleOptions options;
  double min_spatial_order = 1.8;
  double min_temporal_order = 0.9;
};

struct ChaosParams {
  std::string control;
  ChaosOptions options;
  bool baseline = true;
};

struct PsiDecl {
  std::string type = "terminal_moment";  ///< terminal_moment | running_cost | zero
  double clip = 10.0;
  double kappa = 0.0;
  std::vector<double> cost;  ///< per action, running_cost only
};

struct ValueParams {
  std::vector<std::string> controls;  ///< empty = whole family
  ValueOptions options;
  PsiDecl psi;
};

struct HausdorffParams {
  std::vector<std::string> controls;
  HausdorffOptions options;
  std::vector<std::vector<double>> initial_states;  ///< mode coefficients; empty = setup x0
  std::vector<double> probe_deltas{0.05, 0.1, 0.2};  ///< probes (x, x + delta e_1)
};

struct MartingaleParams {
  std::string control;
  int steps = 2048;
  int s_index = -1;  ///< default steps / 4
  int t_index = -1;  ///< default steps
  bool particles = true;
  bool mean_field = true;
  int mean_field_cloud = 256;
  bool deterministic_check = true;
  double min_ratio = 1.8;
};

struct MomentsParams {
  std::string control;
  std::vector<double> p_list{1.0, 2.0};
  bool write_ensemble = true;
};

using ExperimentParams = std::variant<ConditionCheckParams, HeatOracleParams, ChaosParams, ValueParams,
                                      HausdorffParams, MartingaleParams, MomentsParams>;

struct ExperimentDecl {
  std::string name;
  std::string type;
  ModelSetup setup;
  ExperimentParams params;
};

struct RunConfig {
  std::uint64_t master_seed = 1;
  std::string output_dir = "mvlab_out";
  ModelSetup base;
  std::vector<ExperimentDecl> experiments;
  std::vector<std::string> overrides;
  std::string hash;  ///< SHA-256 of the config text and the overrides
};

template <typename T>
T StrictMap::convert(const std::string& key, const YAML::Node& v) const {
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + key_path(key) + "' (line " + std::to_string(v.Mark().line + 1) +
                      "): value has the wrong type");
  }
}

template <typename T>
T StrictMap::get(const std::string& key, const T& fallback) {
  if (!has(key)) return fallback;
  used_.insert(key);
  return convert<T>(key, node_[key]);
}

template <typename T>
T StrictMap::require(const std::string& key) {
  if (!has(key)) throw ConfigError("config key '" + key_path(key) + "' is required (line " + std::to_string(line()) + ")");
  used_.insert(key);
  return convert<T>(key, node_[key]);
}

/// `overrides` are key=value with dotted paths (sequence items by index).
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace mvlab
