#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mvlab/control_search.hpp"

using namespace mvlab;
using Eigen::VectorXd;

namespace {

PorousMedia porous(double q, PorousMediaParams p, int J = 8, double T = 0.25) {
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
  cfg.base_dt = 1.0 / 512;
  cfg.noise_modes = 2;
  return cfg;
}

ValueOptions small_value_options() {
  ValueOptions o;
  o.n_list = {4, 16};
  o.replicates = 8;
  o.picard.n_cloud = 64;
  o.picard.flow_refine = 1;
  o.picard.tol = 1e-8;
  o.proxy = false;
  return o;
}

const ControlFamily kFamily{{{"pull", DiracControl{0}}, {"idle", DiracControl{1}}, {"push", DiracControl{2}}}};

}  // namespace

TEST_CASE("zero functional gives zero values and the first member as argmax") {
  const auto cs = porous(3.0, {});
  const auto r = value_function(cs, kFamily, small_config(), cs.space().eigenfunction(1), zero_functional(),
                                small_value_options());
  for (const auto& row : r.rows) {
    CHECK(row.argmax == 0);
    for (const auto& c : row.cells) CHECK(c.mean == 0.0);
  }
  CHECK(r.limit.value == 0.0);
  CHECK(epsilon_optimal(r, 4, 0.0).size() == 3);
}

TEST_CASE("single-member family") {
  const auto cs = porous(3.0, {});
  const ControlFamily one{{{"push", DiracControl{2}}}};
  const auto r = value_function(cs, one, small_config(), cs.space().eigenfunction(1), terminal_moment(10.0),
                                small_value_options());
  for (const auto& row : r.rows) CHECK(row.value == row.cells[0].mean);
  CHECK(epsilon_optimal(r, 16, 0.0) == std::vector<std::string>{"push"});
}

TEST_CASE("deterministic dynamics without interaction: values constant in n") {
  PorousMediaParams p;
  p.sigma0 = 0.0;
  p.interaction = 0.0;
  const auto cs = porous(3.0, p);
  auto opts = small_value_options();
  opts.proxy = true;
  const auto r = value_function(cs, kFamily, small_config(), cs.space().eigenfunction(1), terminal_moment(10.0), opts);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.rows[0].cells[i].se <= 1e-15);
    CHECK(r.rows[0].cells[i].mean == r.rows[1].cells[i].mean);
    CHECK(r.proxy.cells[i].mean == r.rows[0].cells[i].mean);
    CHECK(r.limit.cells[i].mean == r.rows[0].cells[i].mean);
  }
  CHECK(r.gap(4) == 0.0);
  CHECK(r.controls[r.rows[0].argmax] == "push");

  // Known gap between the two best members.
  const auto& row = r.row(4);
  const double g = row.cells[2].mean - row.cells[1].mean;
  REQUIRE(g > 0);
  CHECK(epsilon_optimal(r, 4, g / 2) == std::vector<std::string>{"push"});
  const auto wide = epsilon_optimal(r, 4, 2 * g);
  CHECK(std::find(wide.begin(), wide.end(), "idle") != wide.end());
  CHECK(std::find(wide.begin(), wide.end(), "push") != wide.end());
  CHECK(epsilon_optimal(r, 4, 1e9).size() == 3);
  CHECK_THROWS_AS(epsilon_optimal(r, 5, 0.0), UsageError);
  CHECK(r.to_json()["rows"].size() == 2);
  CHECK(r.to_csv().find("n,control,mean,se") == 0);
}

TEST_CASE("epsilon-optimal sets grow with epsilon") {
  const auto cs = porous(3.0, {});
  const auto r = value_function(cs, kFamily, small_config(), cs.space().eigenfunction(1), terminal_moment(10.0),
                                small_value_options());
  std::size_t prev = 0;
  for (double eps : {0.0, 1e-3, 1e-2, 1e-1, 1.0}) {
    const auto s = epsilon_optimal(r, 16, eps);
    CHECK(s.size() >= prev);
    prev = s.size();
  }
}

TEST_CASE("functional growth bound is enforced and evaluation is permutation invariant") {
  const auto cs = porous(3.0, {});
  SimConfig cfg = small_config();
  cfg.n_particles = 5;
  const Ensemble e = simulate_particles(cs, kFamily.members[2], cfg, cs.space().eigenfunction(1));
  const Ensemble p = e.permuted({4, 2, 0, 1, 3});
  const auto rc = running_cost(cs.space(), cs.space().eigenfunction(1), VectorXd::LinSpaced(3, 0.0, 2.0), 0.5);
  CHECK(rc(cs.space(), e) == doctest::Approx(rc(cs.space(), p)).epsilon(1e-14));
  const auto tm = terminal_moment(0.1);
  CHECK(tm(cs.space(), e) <= 0.01 + 1e-15);

  TestFunctional bad = terminal_moment(10.0);
  bad.growth_constant = 1e-9;
  bad.eval = [](const SpectralSpace&, const Ensemble&) { return 1.0; };
  CHECK_THROWS_AS(bad(cs.space(), e), AssertionFailure);
  CHECK_THROWS_AS(value_function(cs, kFamily, small_config(), cs.space().eigenfunction(1), bad,
                                 small_value_options()),
                  AssertionFailure);
  auto few = small_value_options();
  few.replicates = 4;
  CHECK_THROWS_AS(value_function(cs, kFamily, small_config(), cs.space().eigenfunction(1), tm, few), ConfigError);
}

TEST_CASE("blow-up is reported with its context") {
  const auto cs = porous(3.0, {}, 32, 1.0);
  SimConfig cfg = small_config();
  cfg.base_dt = 0.05;
  cfg.blowup_ceiling = 1e3;
  try {
    value_function(cs, kFamily, cfg, 3.0 * cs.space().eigenfunction(1), terminal_moment(10.0), small_value_options());
    FAIL("expected a blow-up");
  } catch (const BlowUpError& e) {
    const std::string what = e.what();
    CHECK(what.find("control pull") != std::string::npos);
    CHECK(what.find("n = 4") != std::string::npos);
  }
}

TEST_CASE("chaos without interaction decays like i.i.d. sampling") {
  PorousMediaParams p;
  p.interaction = 0.0;
  const auto cs = porous(2.0, p);
  SimConfig cfg = small_config();
  cfg.M_steps = 1;
  cfg.noise_modes = 1;
  const VectorXd x0 = cs.space().eigenfunction(1);
  const NamedControl c = kFamily.members[1];
  SimConfig rc = cfg;
  rc.n_particles = 1024;
  rc.experiment = lane_id("reference");
  const Ensemble ref = simulate_particles(cs, c, rc, x0);
  rc.rng_seed = 2;
  const Ensemble ind = simulate_particles(cs, c, rc, x0);
  ChaosOptions o;
  o.n_list = {4, 16, 64, 128};
  o.replicates = 8;
  const auto t = chaos_experiment(cs, c, cfg, x0, ref, &ind, o);
  CAPTURE(t.to_json().dump());
  CHECK(t.decreasing_within_se());
  CHECK(t.fitted_rate > 0.35);
  CHECK(t.fitted_rate < 0.65);
  CHECK(t.baseline > 0.0);
  CHECK(t.baseline < t.rows.back().mean);
  CHECK(t.rows[0].slice_w2[0] == 0.0);
  CHECK_THROWS_AS(chaos_experiment(cs, c, cfg, x0, ind, nullptr, ChaosOptions{{10000}, 1, 2.0}), ConfigError);
}

TEST_CASE("hausdorff experiment: singleton family and zero probe") {
  const auto cs = porous(3.0, {});
  const ControlFamily one{{{"push", DiracControl{2}}}};
  SimConfig cfg = small_config();
  HausdorffOptions o;
  o.n_list = {8};
  o.replicates = 1;
  o.picard.n_cloud = 64;
  o.picard.flow_refine = 1;
  const VectorXd x = cs.space().eigenfunction(1);
  const auto t = hausdorff_experiment(cs, one, cfg, {x}, {{x, x}, {x, 1.1 * x}}, o);
  CHECK(t.probe_distances[0] == 0.0);
  CHECK(t.probe_distances[1] > 0.0);
  CHECK(t.continuity_monotone());

  SimConfig sc = cfg;
  sc.n_particles = 8;
  sc.experiment = lane_id("hausdorff");
  const Ensemble e = simulate_particles(cs, one.members[0], sc, x);
  SimConfig pc = cfg;
  pc.experiment = lane_id("hausdorff_reference");
  const auto ref = picard_mckean(cs, one.members[0], pc, x, o.picard);
  const PathMetric pm{cs.space(), cs.actions(), 3.0, 2.0};
  CHECK(t.distances[0][0] == doctest::Approx(wasserstein_paths(pm, e, ref.ensemble)).epsilon(1e-12));
  CHECK(t.to_csv().find("kind,index") == 0);
}
