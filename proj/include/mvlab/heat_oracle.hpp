#pragma once

#include <vector>

#include "json.hpp"

namespace mvlab {

struct HeatOracleOptions {
  std::vector<int> J_list{32, 64, 128};
  double T = 0.05;
  /// dt = dt_factor h^2 in the spatial study, small enough that the Euler
  /// error is a fixed fraction of the spatial one.
  double dt_factor = 0.01;
  int temporal_J = 32;
  /// Temporal study: dt = h^2 / 4, h^2 / 8, ... (dt_levels values).
  int dt_levels = 3;
};

struct HeatOracleResult {
  std::vector<double> h, spatial_error;
  std::vector<double> dt, temporal_error;
  double spatial_order = 0.0;   ///< min over consecutive pairs
  double temporal_order = 0.0;  ///< min over consecutive pairs
  double seconds = 0.0;
  nlohmann::json to_json() const;
};

/// Deterministic heat equation (q = 2, no noise, interaction or control)
/// from sin(pi u) + 0.5 sin(3 pi u) on (0, 1). Spatial errors are against the
/// continuum solution, temporal errors against the exact semi-discrete modal
/// solution; both in the discrete L^2 norm at T.
HeatOracleResult heat_oracle(const HeatOracleOptions& opts);

}  // namespace mvlab
