#include <string>

#include "doctest.h"
#include "mvlab/config.hpp"

using namespace mvlab;

namespace {

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_run_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("empty config takes the defaults") {
  const auto rc = parse_run_config("");
  CHECK(rc.experiments.empty());
  CHECK(rc.base.space.J == 16);
  CHECK(rc.base.controls.members.size() == 1);
  CHECK(rc.hash.size() == 64);
}

TEST_CASE("unknown keys are rejected with path and line") {
  const auto msg = error_of("space:\n  J: 8\n  Jay: 9\n");
  CHECK(contains(msg, "space.Jay"));
  CHECK(contains(msg, "line 3"));
  CHECK(contains(error_of("spaces: {}\n"), "'spaces'"));
  CHECK(contains(error_of("experiments:\n  - {name: a, type: moments, contol: x}\n"), "experiments.0.contol"));
  CHECK(contains(error_of("experiments:\n  - {name: a, type: moments, sim: {n: 3}}\n"), "sim.n"));
}

TEST_CASE("wrong types and bad values name the key") {
  CHECK(contains(error_of("space:\n  J: many\n"), "space.J"));
  CHECK(contains(error_of("sim: {dt_policy: sometimes}\n"), "dt_policy"));
  CHECK(contains(error_of("experiments:\n  - {name: a, type: plot}\n"), "unknown experiment type 'plot'"));
  CHECK(contains(error_of("experiments:\n  - {name: a, type: moments, control: nope}\n"), "nope"));
  CHECK(contains(error_of("experiments:\n  - {name: a, type: moments}\n  - {name: a, type: moments}\n"),
                 "duplicate experiment"));
  CHECK(contains(error_of("controls:\n  - {name: c, dirac: 0, mixture: [1, 0, 0]}\n"), "exactly one"));
  CHECK(!error_of("controls:\n  - {name: c, dirac: 5}\n").empty());
  CHECK(!error_of("experiments:\n  - {name: v, type: value, replicates: 4}\n").empty());
  CHECK(contains(error_of("space: [1, 2]\n"), "must be a map"));
  CHECK(contains(error_of("a: [\n"), "parse error"));
}

TEST_CASE("eta = 1 is rejected naming the constraint") {
  const auto msg = error_of("constants: {eta: 1.0}\n");
  CHECK(contains(msg, "eta > 2"));
  CHECK(contains(error_of("", {"constants.eta=1"}), "eta > 2"));
  CHECK(contains(error_of("experiments:\n  - {name: e, type: moments, constants: {eta: 1}}\n"), "experiment 'e'"));
}

TEST_CASE("overrides and experiment sections") {
  const std::string text =
      "sim: {n_particles: 10}\n"
      "controls:\n  - {name: push, dirac: 2}\n  - {name: fb, feedback: {positive: 0, negative: 2}}\n"
      "experiments:\n"
      "  - {name: m, type: moments, control: fb, sim: {M_steps: 7}}\n"
      "  - {name: k, type: martingale, steps: 64}\n";
  const auto rc = parse_run_config(text, {"sim.n_particles=12", "experiments.1.steps=128"});
  CHECK(rc.base.sim.n_particles == 12);
  CHECK(rc.experiments[0].setup.sim.n_particles == 12);
  CHECK(rc.experiments[0].setup.sim.M_steps == 7);
  CHECK(rc.base.sim.M_steps == 50);
  const auto& mp = std::get<MartingaleParams>(rc.experiments[1].params);
  CHECK(mp.steps == 128);
  CHECK(mp.s_index == 32);
  CHECK(mp.t_index == 128);
  CHECK(mp.control == "push");
  CHECK(std::holds_alternative<FeedbackSignControl>(rc.base.controls.find("fb").rule));

  CHECK(parse_run_config(text).hash != rc.hash);
  CHECK(parse_run_config(text, rc.overrides).hash == rc.hash);
  CHECK(contains(error_of(text, {"experiments.9.steps=1"}), "out of range"));
  CHECK(contains(error_of(text, {"nokey"}), "key=value"));
}

TEST_CASE("fixed path controls get the output grid") {
  const auto rc = parse_run_config(
      "constants: {T: 0.5}\nsim: {M_steps: 2}\n"
      "controls:\n  - {name: p, fixed_path: [[1, 0, 0], [0, 0.5, 0.5]]}\n");
  const auto& fp = std::get<FixedPathControl>(rc.base.controls.members[0].rule);
  CHECK(fp.path.times == std::vector<double>{0.0, 0.25, 0.5});
  CHECK(fp.path.cell_probs(1, 2) == 0.5);
  CHECK(!error_of("sim: {M_steps: 3}\ncontrols:\n  - {name: p, fixed_path: [[1, 0, 0]]}\n").empty());
}

TEST_CASE("initial state from modes") {
  const auto rc = parse_run_config("space: {J: 8}\ninitial_state: {modes: [0.5, 0.25]}\n");
  const SpectralSpace sp(rc.base.space);
  const Eigen::VectorXd x = rc.base.initial_state(sp);
  CHECK((x - 0.5 * sp.eigenfunction(1) - 0.25 * sp.eigenfunction(2)).norm() < 1e-12);
  CHECK(!error_of("space: {J: 2}\ninitial_state: {modes: [1, 2, 3]}\n").empty());
}
