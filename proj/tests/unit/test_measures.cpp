#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "mvlab/measures.hpp"
#include "mvlab/rng.hpp"

using namespace mvlab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int J = 8;
constexpr int M = 6;
constexpr int K = 3;

SpaceConfig config() {
  SpaceConfig c;
  c.J = J;
  c.q = 3.0;
  c.constants.alpha = 3.0;
  return c;
}

const SpectralSpace& space() {
  static const SpectralSpace sp(config());
  return sp;
}

const ActionSpace& actions() {
  static const ActionSpace a = ActionSpace::from_scalars({-1.0, 0.0, 1.0});
  return a;
}

VectorXd field(CounterStream& s) {
  VectorXd c(J);
  for (int j = 0; j < J; ++j) c[j] = s.next_normal() / (j + 1.0);
  return space().from_sine(c);
}

ControlledPath random_path(CounterStream& s) {
  ControlledPath p;
  for (int m = 0; m <= M; ++m) p.path.times.push_back(double(m) / M);
  p.path.states.resize(J, M + 1);
  for (int m = 0; m <= M; ++m) p.path.states.col(m) = field(s);
  p.control.times = p.path.times;
  p.control.cell_probs.resize(M, K);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K; ++k) p.control.cell_probs(m, k) = s.next_uniform();
    p.control.cell_probs.row(m) /= p.control.cell_probs.row(m).sum();
  }
  return p;
}

Ensemble random_ensemble(CounterStream& s, int n) {
  Ensemble e;
  for (int k = 0; k < n; ++k) e.paths.push_back(random_path(s));
  e.init_x = VectorXd::Zero(J);
  return e;
}

EmpiricalFieldMeasure random_measure(CounterStream& s, int n) {
  MatrixXd A(J, n);
  for (int i = 0; i < n; ++i) A.col(i) = field(s);
  return EmpiricalFieldMeasure::uniform(A);
}

double brute_force_uniform(const MatrixXd& C) {
  const int n = static_cast<int>(C.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0;
    for (int i = 0; i < n; ++i) c += C(i, perm[i]);
    best = std::min(best, c / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

PathMetric metric(double rho = 2.0) { return PathMetric{space(), actions(), 3.0, rho}; }

}  // namespace

TEST_CASE("field Wasserstein between point masses is the ground norm") {
  CounterStream s(StreamKey{31, 0, 0, 0, 0});
  const VectorXd x = field(s), y = field(s);
  for (Space g : {Space::H, Space::X, Space::V}) {
    CHECK(wasserstein_fields(space(), EmpiricalFieldMeasure::dirac(x), EmpiricalFieldMeasure::dirac(y), 2.0, g) ==
          doctest::Approx(space().norm((x - y).eval(), g)).epsilon(1e-12));
  }
  const auto mu = random_measure(s, 5);
  CHECK(wasserstein_fields(space(), mu, mu, 2.0, Space::X) <= 1e-12);
  CHECK_THROWS_AS(wasserstein_fields(space(), mu, mu, 2.0, Space::Y), UsageError);
}

TEST_CASE("field Wasserstein matches assignment enumeration up to 6 atoms") {
  CounterStream s(StreamKey{32, 0, 0, 0, 0});
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    const auto mu = random_measure(s, n), nu = random_measure(s, n);
    const double r = trial % 2 ? 2.0 : 1.0;
    const MatrixXd fa = ground_features(space(), mu.atoms(), Space::H);
    const MatrixXd fb = ground_features(space(), nu.atoms(), Space::H);
    MatrixXd C(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) C(i, j) = std::pow((fa.col(i) - fb.col(j)).norm(), r);
    const double oracle = std::pow(brute_force_uniform(C), 1.0 / r);
    CHECK(std::abs(wasserstein_fields(space(), mu, nu, r, Space::H) - oracle) <= 1e-10);
  }
}

TEST_CASE("Wasserstein order monotonicity") {
  CounterStream s(StreamKey{33, 0, 0, 0, 0});
  for (int i = 0; i < 50; ++i) {
    const auto mu = random_measure(s, 4), nu = random_measure(s, 5);
    const double w1 = wasserstein_fields(space(), mu, nu, 1.0, Space::X);
    const double w2 = wasserstein_fields(space(), mu, nu, 2.0, Space::X);
    const double w3 = wasserstein_fields(space(), mu, nu, 3.0, Space::X);
    CHECK(w1 <= w2 + 1e-12);
    CHECK(w2 <= w3 + 1e-12);
  }
}

TEST_CASE("empirical state measure") {
  CounterStream s(StreamKey{34, 0, 0, 0, 0});
  const Ensemble one = random_ensemble(s, 1);
  const auto d = empirical_state_measure(one, 2);
  CHECK(d.size() == 1);
  CHECK(d.atoms().col(0) == one.paths[0].path.states.col(2));

  const Ensemble e = random_ensemble(s, 5);
  const auto mu = empirical_state_measure(e, 3);
  VectorXd mean = VectorXd::Zero(J);
  for (const auto& p : e.paths) mean += p.path.states.col(3);
  mean /= 5.0;
  CHECK((mu.mean() - mean).cwiseAbs().maxCoeff() <= 1e-12);
  const Ensemble perm = e.permuted({4, 2, 0, 1, 3});
  CHECK(wasserstein_fields(space(), mu, empirical_state_measure(perm, 3), 2.0, Space::H) <= 1e-12);
  CHECK_THROWS_AS(empirical_state_measure(e, M + 1), UsageError);
}

TEST_CASE("path cost matrix agrees with the pairwise metric") {
  CounterStream s(StreamKey{35, 0, 0, 0, 0});
  const Ensemble a = random_ensemble(s, 4), b = random_ensemble(s, 3);
  const auto pm = metric(2.0);
  const MatrixXd C = pm.cost_matrix(a, b);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = pm.distance(a.paths[i], b.paths[j]);
      CHECK(C(i, j) == doctest::Approx(d * d).epsilon(1e-12));
    }
}

TEST_CASE("path Wasserstein: identity, singletons, permutation oracle") {
  CounterStream s(StreamKey{36, 0, 0, 0, 0});
  const auto pm = metric(2.0);
  const Ensemble a = random_ensemble(s, 4);
  CHECK(wasserstein_paths(pm, a, a) <= 1e-12);
  const Ensemble x = random_ensemble(s, 1), y = random_ensemble(s, 1);
  CHECK(wasserstein_paths(pm, x, y) == doctest::Approx(pm.distance(x.paths[0], y.paths[0])).epsilon(1e-12));
  for (int trial = 0; trial < 20; ++trial) {
    const Ensemble p = random_ensemble(s, 4), q = random_ensemble(s, 4);
    const double oracle = std::sqrt(brute_force_uniform(pm.cost_matrix(p, q)));
    CHECK(std::abs(wasserstein_paths(pm, p, q) - oracle) <= 1e-10);
  }
}

TEST_CASE("outer Wasserstein") {
  CounterStream s(StreamKey{37, 0, 0, 0, 0});
  const auto pm = metric(2.0);
  const Ensemble A = random_ensemble(s, 3), B = random_ensemble(s, 2), C = random_ensemble(s, 3),
                 D = random_ensemble(s, 2);
  const OuterLaw P{{0.3, 0.7}, {&A, &B}};
  CHECK(wasserstein_outer(pm, P, P) <= 1e-12);
  CHECK(wasserstein_outer(pm, OuterLaw::dirac(A), OuterLaw::dirac(C)) == wasserstein_paths(pm, A, C));

  // 2 x 2 transport polytope: flow x on (0, 0) between its two vertices.
  const OuterLaw Q{{0.6, 0.4}, {&C, &D}};
  MatrixXd cost(2, 2);
  cost << std::pow(wasserstein_paths(pm, A, C), 2), std::pow(wasserstein_paths(pm, A, D), 2),
      std::pow(wasserstein_paths(pm, B, C), 2), std::pow(wasserstein_paths(pm, B, D), 2);
  auto total = [&](double x) {
    return x * cost(0, 0) + (0.3 - x) * cost(0, 1) + (0.6 - x) * cost(1, 0) + (0.4 - 0.3 + x) * cost(1, 1);
  };
  const double lo = std::max(0.0, 0.3 - 0.4), hi = std::min(0.3, 0.6);
  const double oracle = std::sqrt(std::min(total(lo), total(hi)));
  CHECK(std::abs(wasserstein_outer(pm, P, Q) - oracle) <= 1e-10);
}

TEST_CASE("metric axioms at all three levels") {
  CounterStream s(StreamKey{38, 0, 0, 0, 0});
  const auto pm = metric(2.0);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_measure(s, 3), b = random_measure(s, 4), c = random_measure(s, 2);
    auto w = [&](const EmpiricalFieldMeasure& x, const EmpiricalFieldMeasure& y) {
      return wasserstein_fields(space(), x, y, 2.0, Space::X);
    };
    CHECK(std::abs(w(a, b) - w(b, a)) <= 1e-9);
    CHECK(w(a, c) <= w(a, b) + w(b, c) + 1e-9);
  }
  for (int t = 0; t < 100; ++t) {
    const Ensemble a = random_ensemble(s, 2), b = random_ensemble(s, 3), c = random_ensemble(s, 2);
    const double ab = wasserstein_paths(pm, a, b);
    CHECK(std::abs(ab - wasserstein_paths(pm, b, a)) <= 1e-9);
    CHECK(wasserstein_paths(pm, a, c) <= ab + wasserstein_paths(pm, b, c) + 1e-9);
    CHECK(wasserstein_paths(pm, a, a) <= 1e-9);
  }
  for (int t = 0; t < 100; ++t) {
    std::vector<Ensemble> pool;
    for (int i = 0; i < 6; ++i) pool.push_back(random_ensemble(s, 2));
    const OuterLaw P{{0.5, 0.5}, {&pool[0], &pool[1]}};
    const OuterLaw Q{{0.2, 0.8}, {&pool[2], &pool[3]}};
    const OuterLaw R{{0.9, 0.1}, {&pool[4], &pool[5]}};
    const double pq = wasserstein_outer(pm, P, Q);
    CHECK(std::abs(pq - wasserstein_outer(pm, Q, P)) <= 1e-9);
    CHECK(wasserstein_outer(pm, P, R) <= pq + wasserstein_outer(pm, Q, R) + 1e-9);
  }
}

TEST_CASE("Hausdorff distance") {
  CounterStream s(StreamKey{39, 0, 0, 0, 0});
  const auto pm = metric(2.0);
  std::vector<Ensemble> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(random_ensemble(s, 2));
  LawSet B;
  for (auto& e : pool) B.members.push_back(OuterLaw::dirac(e));
  LawSet A;
  for (int i = 0; i < 3; ++i) A.members.push_back(OuterLaw::dirac(pool[i]));
  CHECK(hausdorff(pm, B, B) <= 1e-12);

  // A is a subset of B: only the B -> A direction contributes.
  double oracle = 0.0;
  for (const auto& b : B.members) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : A.members) best = std::min(best, wasserstein_outer(pm, b, a));
    oracle = std::max(oracle, best);
  }
  CHECK(hausdorff(pm, A, B) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(hausdorff(pm, B, A) == doctest::Approx(oracle).epsilon(1e-12));

  LawSet X{{}, {OuterLaw::dirac(pool[0])}}, Y{{}, {OuterLaw::dirac(pool[1])}};
  CHECK(hausdorff(pm, X, Y) == wasserstein_outer(pm, X.members[0], Y.members[0]));
  CHECK_THROWS_AS(hausdorff(pm, X, LawSet{}), UsageError);

  // Triangle inequality for the Hausdorff metric on random small sets.
  for (int t = 0; t < 100; ++t) {
    MatrixXd pts(2, 9);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = s.next_normal();
    auto h = [&](int a0, int b0) {
      MatrixXd D(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) D(i, j) = (pts.col(a0 + i) - pts.col(b0 + j)).norm();
      return hausdorff(D);
    };
    CHECK(h(0, 6) <= h(0, 3) + h(3, 6) + 1e-9);
  }
}
