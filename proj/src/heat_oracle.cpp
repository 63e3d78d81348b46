#include "mvlab/heat_oracle.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "mvlab/particle_sim.hpp"

namespace mvlab {

namespace {

PorousMedia heat_instance(int J, double T) {
  SpaceConfig sc;
  sc.J = J;
  sc.q = 2.0;
  sc.constants.T = T;
  PorousMediaParams p;
  p.sigma0 = 0.0;
  p.interaction = 0.0;
  return PorousMedia(SpectralSpace(sc), ActionSpace::from_scalars({0.0}), p);
}

Eigen::VectorXd run(const PorousMedia& cs, const Eigen::VectorXd& x0, double dt) {
  SimConfig cfg;
  cfg.n_particles = 1;
  cfg.M_steps = 1;
  cfg.dt_policy = DtPolicy::Fixed;
  cfg.base_dt = dt;
  cfg.noise_modes = 1;
  return simulate_particles(cs, NamedControl{"none", DiracControl{0}}, cfg, x0).paths[0].path.states.col(1);
}

double min_order(const std::vector<double>& step, const std::vector<double>& err) {
  double order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < err.size(); ++i)
    order = std::min(order, std::log(err[i - 1] / err[i]) / std::log(step[i - 1] / step[i]));
  return order;
}

}  // namespace

nlohmann::json HeatOracleResult::to_json() const {
  return {{"h", h},
          {"spatial_error", spatial_error},
          {"spatial_order", spatial_order},
          {"dt", dt},
          {"temporal_error", temporal_error},
          {"temporal_order", temporal_order}};
}

HeatOracleResult heat_oracle(const HeatOracleOptions& opts) {
  if (opts.J_list.size() < 2 || opts.dt_levels < 2) throw ConfigError("heat_oracle: need two levels per study");
  const auto t0 = std::chrono::steady_clock::now();
  const double pi = std::numbers::pi, T = opts.T;
  HeatOracleResult r;
  for (int J : opts.J_list) {
    const auto cs = heat_instance(J, T);
    const auto& sp = cs.space();
    Eigen::VectorXd x0(J), exact(J);
    for (int i = 0; i < J; ++i) {
      const double u = sp.h() * (i + 1);
      x0[i] = std::sin(pi * u) + 0.5 * std::sin(3 * pi * u);
      exact[i] = std::exp(-pi * pi * T) * std::sin(pi * u) + 0.5 * std::exp(-9 * pi * pi * T) * std::sin(3 * pi * u);
    }
    r.h.push_back(sp.h());
    r.spatial_error.push_back(sp.norm((run(cs, x0, opts.dt_factor * sp.h() * sp.h()) - exact).eval(), Space::H));
  }
  {
    const auto cs = heat_instance(opts.temporal_J, T);
    const auto& sp = cs.space();
    Eigen::VectorXd x0(sp.size());
    for (int i = 0; i < sp.size(); ++i) {
      const double u = sp.h() * (i + 1);
      x0[i] = std::sin(pi * u) + 0.5 * std::sin(3 * pi * u);
    }
    const Eigen::VectorXd c = sp.to_sine(x0);
    const Eigen::VectorXd exact = sp.from_sine((c.array() * (-sp.eigenvalues().array() * T).exp()).matrix().eval());
    double dt = 0.25 * sp.h() * sp.h();
    for (int l = 0; l < opts.dt_levels; ++l, dt /= 2) {
      const double actual = T / std::ceil(T / dt - 1e-9);
      r.dt.push_back(actual);
      r.temporal_error.push_back(sp.norm((run(cs, x0, dt) - exact).eval(), Space::H));
    }
  }
  r.spatial_order = min_order(r.h, r.spatial_error);
  r.temporal_order = min_order(r.dt, r.temporal_error);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace mvlab
