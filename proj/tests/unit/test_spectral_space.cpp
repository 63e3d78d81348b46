#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "mvlab/rng.hpp"
#include "mvlab/spectral_space.hpp"

using namespace mvlab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SpaceConfig make_config(int J, double L = 1.0, double q = 3.0) {
  SpaceConfig cfg;
  cfg.J = J;
  cfg.domain_length = L;
  cfg.q = q;
  cfg.constants.alpha = std::max(q, 2.5);
  return cfg;
}

VectorXd random_field(CounterStream& s, int J, double scale = 1.0) {
  VectorXd v(J);
  for (int j = 0; j < J; ++j) v[j] = scale * s.next_normal();
  return v;
}

}  // namespace

TEST_CASE("closed-form eigenpairs match dense eigendecomposition of the stencil") {
  for (int J : {5, 16, 33}) {
    for (double L : {1.0, 2.5}) {
      SpectralSpace space(make_config(J, L));
      const double h = space.h();
      MatrixXd A = MatrixXd::Zero(J, J);
      for (int j = 0; j < J; ++j) {
        A(j, j) = 2.0 / (h * h);
        if (j > 0) A(j, j - 1) = -1.0 / (h * h);
        if (j + 1 < J) A(j, j + 1) = -1.0 / (h * h);
      }
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
      for (int k = 0; k < J; ++k)
        CHECK(space.eigenvalues()[k] == doctest::Approx(es.eigenvalues()[k]).epsilon(1e-10));
      // Eigenfunctions satisfy -Delta_h e_k = mu_k e_k on the grid.
      for (int k = 1; k <= J; ++k) {
        const VectorXd e = space.eigenfunction(k);
        const VectorXd r = space.laplacian(e) + space.eigenvalues()[k - 1] * e;
        CHECK(r.norm() <= 1e-8 * space.eigenvalues()[k - 1] * e.norm());
      }
    }
  }
}

TEST_CASE("norms of zero and of the first eigenfunction") {
  const int J = 20;
  const double L = 1.7;
  SpectralSpace space(make_config(J, L));
  const VectorXd zero = VectorXd::Zero(J);
  for (Space s : {Space::H, Space::V, Space::X, Space::Y}) CHECK(space.norm(zero, s) == 0.0);
  const VectorXd e1 = space.eigenfunction(1);
  const double mu1 = std::pow(2.0 * (J + 1) / L, 2) * std::pow(std::sin(std::numbers::pi / (2.0 * (J + 1))), 2);
  CHECK(space.norm(e1, Space::H) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(space.norm(e1, Space::X) == doctest::Approx(std::pow(mu1, -0.5)).epsilon(1e-12));
  CHECK(space.norm(e1, Space::V) == doctest::Approx(std::pow(mu1, -1.5)).epsilon(1e-12));
}

TEST_CASE("sine transform round trip, dense and matrix-free") {
  CounterStream s(StreamKey{3, 1, 0, 0, 0});
  for (int J : {2, 17, 64, 1030}) {
    SpectralSpace space(make_config(J));
    const VectorXd x = random_field(s, J);
    const VectorXd back = space.from_sine(space.to_sine(x));
    CHECK((back - x).norm() <= 1e-10 * x.norm());
    // Parseval in the h-weighted inner product.
    const VectorXd c = space.to_sine(x);
    CHECK(c.squaredNorm() == doctest::Approx(space.h() * x.squaredNorm()).epsilon(1e-10));
  }
}

TEST_CASE("Y norm of a constant converges to the Riemann limit") {
  SpaceConfig cfg = make_config(10000, 1.0, 2.0);
  SpectralSpace space(cfg);
  const VectorXd one = VectorXd::Ones(cfg.J);
  CHECK(std::abs(space.norm(one, Space::Y) - 1.0) < 1e-4);
}

TEST_CASE("N functional: zero, quadrature limit, N_p") {
  SpectralSpace small(make_config(8));
  CHECK(small.nfunctional(VectorXd::Zero(8)) == 0.0);
  for (double L : {1.0, 2.0}) {
    SpaceConfig cfg = make_config(10000, L, 2.0);
    SpectralSpace space(cfg);
    VectorXd y(cfg.J);
    for (int j = 0; j < cfg.J; ++j) y[j] = std::sin(std::numbers::pi * space.grid()[j] / L);
    // int_0^L (pi/L)^2 cos^2(pi u / L) du = pi^2 / (2 L)
    CHECK(std::abs(space.nfunctional(y) - std::numbers::pi * std::numbers::pi / (2 * L)) < 1e-4);
    CHECK(space.n_p(y, 1.0) == doctest::Approx(space.nfunctional(y)));
    CHECK(space.n_p(y, 3.0) == doctest::Approx(std::pow(space.norm(y, Space::H), 4) * space.nfunctional(y)));
  }
}

TEST_CASE("N functional homogeneity on random fields") {
  CounterStream s(StreamKey{4, 2, 0, 0, 0});
  for (double q : {2.0, 3.0, 4.0}) {
    SpectralSpace space(make_config(24, 1.0, q));
    for (int trial = 0; trial < 1000; ++trial) {
      const VectorXd y = random_field(s, 24);
      const double n1 = space.nfunctional(y);
      for (double c : {0.0, 0.5, 1.0, 2.0, 10.0}) {
        const double nc = space.nfunctional((c * y).eval());
        CHECK(nc <= std::pow(c, q) * n1 * (1 + 1e-12) + 1e-10);
        if (q == 2.0) CHECK(nc == doctest::Approx(c * c * n1).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("sublevel sets of N have bounded Y norm (discrete Poincare)") {
  CounterStream s(StreamKey{5, 2, 0, 0, 0});
  for (double q : {2.0, 3.0, 4.0}) {
    SpectralSpace space(make_config(32, 1.0, q));
    const double mu1 = space.eigenvalues()[0];
    for (int trial = 0; trial < 500; ++trial) {
      VectorXd y = random_field(s, 32);
      // Scale onto the boundary N(y) = 1 using homogeneity of degree q.
      y *= std::pow(1.0 / space.nfunctional(y), 1.0 / q);
      CHECK(space.nfunctional(y) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::pow(space.norm(y, Space::Y), q) <= 1.0 / mu1 * (1 + 1e-9));
    }
  }
}

TEST_CASE("norm embedding V <= C X <= C H via monotone weights") {
  SpectralSpace space(make_config(32));
  const double mu1 = space.eigenvalues()[0];
  for (int k = 1; k < 32; ++k) CHECK(space.eigenvalues()[k] > space.eigenvalues()[k - 1]);
  CounterStream s(StreamKey{6, 2, 0, 0, 0});
  for (int trial = 0; trial < 1000; ++trial) {
    const VectorXd y = random_field(s, 32);
    CHECK(space.norm(y, Space::V) <= space.norm(y, Space::X) / mu1 * (1 + 1e-12));
    CHECK(space.norm(y, Space::X) <= space.norm(y, Space::H) / std::sqrt(mu1) * (1 + 1e-12));
  }
}

TEST_CASE("Laplacian stencil is symmetric in the h-weighted product") {
  SpectralSpace space(make_config(40));
  CounterStream s(StreamKey{7, 2, 0, 0, 0});
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXd a = random_field(s, 40), b = random_field(s, 40);
    const double lhs = space.inner_H(space.laplacian(a), b);
    const double rhs = space.inner_H(a, space.laplacian(b));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    // inverse_laplacian undoes the stencil
    CHECK((space.inverse_laplacian(space.laplacian(a)) - a).norm() <= 1e-9 * a.norm());
  }
}

TEST_CASE("Y* norm is the L^{q'} norm of Phi_q under the isometry") {
  SpectralSpace space(make_config(30, 1.0, 3.0));
  CounterStream s(StreamKey{8, 2, 0, 0, 0});
  const VectorXd y = random_field(s, 30);
  const VectorXd z = space.laplacian(signed_pow(y, 2.0));
  // ||Delta Phi_q(y)||_{Y*}^{q/(q-1)} = ||y||_Y^q
  CHECK(std::pow(space.ystar_norm(z), 1.5) == doctest::Approx(std::pow(space.norm(y, Space::Y), 3.0)).epsilon(1e-9));
}

TEST_CASE("dimension mismatch is a configuration error") {
  SpectralSpace space(make_config(10));
  CHECK_THROWS_AS(space.norm(VectorXd::Zero(9), Space::H), ConfigError);
  CHECK_THROWS_AS(space.nfunctional(VectorXd::Zero(11)), ConfigError);
}

TEST_CASE("constant restrictions are enforced") {
  ModelConstants c;
  CHECK_NOTHROW(c.validate());
  c.eta = 1.0;
  try {
    c.validate();
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("eta > 2") != std::string::npos);
  }
  ModelConstants r;
  r.rho = 3.0;  // alpha = 3 must exceed rho
  CHECK_THROWS_AS(r.validate(), ConfigError);
}

namespace {

PathSample random_path(CounterStream& s, int J, const std::vector<double>& times) {
  PathSample p;
  p.times = times;
  p.states.resize(J, static_cast<Eigen::Index>(times.size()));
  for (Eigen::Index m = 0; m < p.states.cols(); ++m) p.states.col(m) = random_field(s, J);
  return p;
}

}  // namespace

TEST_CASE("path metric: identity, constant path, metric axioms") {
  SpaceConfig cfg = make_config(12);
  SpectralSpace space(cfg);
  const double alpha = cfg.constants.alpha;
  const double T = 0.8;
  std::vector<double> times{0.0, 0.1, 0.35, 0.5, 0.8};
  CounterStream s(StreamKey{10, 3, 0, 0, 0});

  const PathSample a = random_path(s, 12, times);
  CHECK(path_metric(space, a, a, alpha) == 0.0);

  PathSample constant;
  constant.times = times;
  const VectorXd x = random_field(s, 12);
  constant.states = x.replicate(1, 5);
  PathSample zero = constant;
  zero.states.setZero();
  const double expected = space.norm(x, Space::V) + std::pow(T, 1.0 / alpha) * space.norm(x, Space::Y);
  CHECK(path_metric(space, constant, zero, alpha) == doctest::Approx(expected).epsilon(1e-12));

  for (int trial = 0; trial < 1000; ++trial) {
    const PathSample p = random_path(s, 12, times), q = random_path(s, 12, times), r = random_path(s, 12, times);
    const double pq = path_metric(space, p, q, alpha);
    CHECK(pq == doctest::Approx(path_metric(space, q, p, alpha)).epsilon(1e-13));
    CHECK(path_metric(space, p, r, alpha) <= pq + path_metric(space, q, r, alpha) + 1e-12);
  }

  PathSample other = a;
  other.times[2] = 0.3;
  CHECK_THROWS_AS(path_metric(space, a, other, alpha), UsageError);
}
