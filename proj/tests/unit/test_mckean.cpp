#include <cmath>

#include "doctest.h"
#include "mvlab/mckean_solver.hpp"

using namespace mvlab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

PorousMedia porous(double q, int J, double T, PorousMediaParams p) {
  SpaceConfig c;
  c.J = J;
  c.q = q;
  c.constants.T = T;
  c.constants.alpha = 3.0;
  return PorousMedia(SpectralSpace(c), ActionSpace::from_scalars({-1.0, 0.0, 1.0}), p);
}

SimConfig small_config() {
  SimConfig cfg;
  cfg.M_steps = 4;
  cfg.dt_policy = DtPolicy::Fixed;
  cfg.base_dt = 1.0 / 1024;
  cfg.noise_modes = 2;
  return cfg;
}

PicardOptions small_options() {
  PicardOptions o;
  o.n_cloud = 128;
  o.flow_refine = 2;
  o.tol = 1e-8;
  o.max_iter = 30;
  return o;
}

const NamedControl kPush{"push", DiracControl{2}};

}  // namespace

TEST_CASE("without interaction the second iterate is already the fixed point") {
  PorousMediaParams p;
  p.interaction = 0.0;
  const auto cs = porous(3.0, 8, 0.25, p);
  const auto r = picard_mckean(cs, kPush, small_config(), cs.space().eigenfunction(1), small_options());
  REQUIRE(r.residuals.size() == 2);
  CHECK(r.residuals[0] > 0.0);
  CHECK(r.residuals[1] == 0.0);
  CHECK(r.converged);
}

TEST_CASE("q = 2: the mean follows the linear heat flow with forcing") {
  PorousMediaParams p;
  p.sigma0 = 0.2;
  const double T = 0.25;
  const auto cs = porous(2.0, 8, T, p);
  const auto& sp = cs.space();
  const VectorXd x0 = sp.eigenfunction(1);
  auto opts = small_options();
  opts.n_cloud = 512;
  SimConfig cfg = small_config();
  cfg.base_dt = 1.0 / 8192;
  const auto r = picard_mckean(cs, kPush, cfg, x0, opts);
  CHECK(r.converged);

  // Exact semi-discrete mean in sine coordinates.
  const VectorXd mu = sp.eigenvalues();
  const VectorXd f = sp.to_sine(cs.control_field(2));
  const VectorXd c0 = sp.to_sine(x0);
  const VectorXd decay = (-mu.array() * T).exp();
  const VectorXd exact = (c0.array() * decay.array() + f.array() * (1.0 - decay.array()) / mu.array()).matrix();
  const MatrixXd terminal = sp.to_sine(r.ensemble.slice(cfg.M_steps));
  const VectorXd mean = terminal.rowwise().mean();
  for (int j = 0; j < 8; ++j) {
    const double se = std::sqrt((terminal.row(j).array() - mean[j]).square().sum() / (opts.n_cloud - 1.0) / opts.n_cloud);
    CAPTURE(j);
    CHECK(std::abs(mean[j] - exact[j]) <= 4 * se + 2e-3 * (1 + std::abs(exact[j])));
  }
}

TEST_CASE("nonlinear case contracts and is self consistent") {
  const auto cs = porous(3.0, 8, 0.25, {});
  const auto cfg = small_config();
  const auto opts = small_options();
  const VectorXd x0 = cs.space().eigenfunction(1);
  const auto r = picard_mckean(cs, kPush, cfg, x0, opts);
  REQUIRE(r.converged);
  CHECK(r.residuals.size() >= 3);
  CHECK(r.contraction_ratio() < 1.0);

  SimConfig fine = cfg;
  fine.n_particles = opts.n_cloud;
  fine.M_steps = cfg.M_steps * opts.flow_refine;
  const auto again = MeasureFlow::from_ensemble(simulate_frozen(cs, kPush, fine, x0, r.flow));
  CHECK(flow_residual(cs.space(), r.flow, again) <= 2 * opts.tol);

  for (std::size_t m = 0; m < r.flow.times.size(); ++m)
    CHECK((r.flow.means.col(m) - r.flow.clouds[m].mean()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(r.ensemble.steps() == cfg.M_steps);
  CHECK(r.to_json()["converged"] == true);
}

TEST_CASE("picard is deterministic given the seed") {
  const auto cs = porous(3.0, 8, 0.25, {});
  const VectorXd x0 = cs.space().eigenfunction(1);
  const auto a = picard_mckean(cs, kPush, small_config(), x0, small_options());
  const auto b = picard_mckean(cs, kPush, small_config(), x0, small_options());
  CHECK(a.residuals == b.residuals);
  CHECK(a.ensemble.slice(4) == b.ensemble.slice(4));
}

TEST_CASE("non-convergence is reported, not hidden") {
  const auto cs = porous(3.0, 8, 0.25, {});
  auto opts = small_options();
  opts.max_iter = 1;
  const auto r = picard_mckean(cs, kPush, small_config(), cs.space().eigenfunction(1), opts);
  CHECK(!r.converged);
  CHECK(r.to_json().contains("warning"));
}

TEST_CASE("invalid options") {
  const auto cs = porous(3.0, 8, 0.25, {});
  const VectorXd x0 = cs.space().eigenfunction(1);
  auto opts = small_options();
  opts.n_cloud = 10;
  CHECK_THROWS_AS(picard_mckean(cs, kPush, small_config(), x0, opts), ConfigError);
  opts = small_options();
  opts.tol = 0.0;
  CHECK_THROWS_AS(picard_mckean(cs, kPush, small_config(), x0, opts), ConfigError);
}

TEST_CASE("downsampling averages control rows by cell length") {
  const auto cs = porous(3.0, 8, 0.25, {});
  SimConfig cfg = small_config();
  cfg.n_particles = 3;
  cfg.M_steps = 4;
  const Ensemble e = simulate_particles(cs, NamedControl{"fb", FeedbackSignControl{2, 0}}, cfg,
                                        cs.space().eigenfunction(1));
  const Ensemble d = downsample(e, 2);
  CHECK(d.steps() == 2);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(d.paths[k].path.states.col(1) == e.paths[k].path.states.col(2));
    const auto& P = e.paths[k].control.cell_probs;
    CHECK((d.paths[k].control.cell_probs.row(1) - 0.5 * (P.row(2) + P.row(3))).cwiseAbs().maxCoeff() <= 1e-15);
  }
  CHECK_THROWS_AS(downsample(e, 3), UsageError);
}
