#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvlab/errors.hpp"

namespace mvlab {

/// Norms of the discretized spaces Y = L^q, H = L^2, X = W^{-1,2},
/// V = W^{-3,2} on (0, L).
enum class Space { H, V, X, Y };

const char* to_string(Space s);

/// The parametric constants shared by all conditions and bounds.
struct ModelConstants {
  double T = 1.0;
  double lambda = 1.0;
  double alpha = 3.0;
  double gamma = 1.5;
  double beta = 2.0;
  double eta = 2.5;
  double rho = 2.0;

  /// Throws ConfigError naming the first violated restriction.
  void validate() const {
    auto fail = [](const std::string& rule, const std::string& detail) {
      throw ConfigError("constant restriction violated: " + rule + " (" + detail + ")");
    };
    auto num = [](double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    };
    if (!(T > 0)) fail("T > 0", "T = " + num(T));
    if (!(lambda > 0)) fail("lambda > 0", "lambda = " + num(lambda));
    if (!(alpha > 1)) fail("alpha > 1", "alpha = " + num(alpha));
    if (!(gamma > 1)) fail("gamma > 1", "gamma = " + num(gamma));
    if (!(beta >= std::max(2.0, gamma))) fail("beta >= max(2, gamma)", "beta = " + num(beta));
    if (!(eta > 2)) fail("eta > 2", "eta = " + num(eta));
    if (!(eta >= std::max(beta / 2, alpha / 2)))
      fail("eta >= max(beta/2, alpha/2)", "eta = " + num(eta));
    if (!(alpha > rho)) fail("alpha > rho", "alpha = " + num(alpha) + ", rho = " + num(rho));
    if (!(rho >= 1)) fail("rho >= 1", "rho = " + num(rho));
  }
};

struct SpaceConfig {
  int J = 16;                  ///< interior grid points = retained sine modes
  double domain_length = 1.0;  ///< L
  double q = 3.0;              ///< porous-media exponent, Y = L^q
  int dual_order_V = 3;        ///< Sobolev order of V = W^{-(d+2),2}, d = 1
  ModelConstants constants;

  void validate() const {
    if (J < 2) throw ConfigError("space.J must be >= 2");
    if (!(domain_length > 0)) throw ConfigError("space.domain_length must be > 0");
    if (!(q >= 2)) throw ConfigError("space.q must be >= 2");
    if (dual_order_V < 1) throw ConfigError("space.dual_order_V must be >= 1");
    constants.validate();
  }
};

/// |x|^e * sign(x), elementwise. Integer exponents 1, 2, 3 avoid pow().
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> signed_pow(const Eigen::MatrixBase<Derived>& x,
                                                                     typename Derived::Scalar e) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(x.size());
  if (e == Scalar(1)) {
    out = x;
  } else if (e == Scalar(2)) {
    out = x.array() * x.array().abs();
  } else if (e == Scalar(3)) {
    out = x.array().cube();
  } else {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Scalar v = x[i];
      out[i] = v == Scalar(0) ? Scalar(0) : std::copysign(std::pow(std::abs(v), e), v);
    }
  }
  return out;
}

template <typename Scalar>
inline Scalar signed_pow(Scalar x, Scalar e) {
  return x == Scalar(0) ? Scalar(0) : std::copysign(std::pow(std::abs(x), e), x);
}

/// sum_i |x_i|^p with fast paths for p in {1, 2, 3, 4}.
template <typename Derived>
typename Derived::Scalar abs_pow_sum(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  if (p == Scalar(2)) return x.squaredNorm();
  if (p == Scalar(1)) return x.template lpNorm<1>();
  if (p == Scalar(3)) return x.array().abs().cube().sum();
  if (p == Scalar(4)) return x.array().square().square().sum();
  return x.array().abs().pow(p).sum();
}

/// Grid and sine-spectral discretization of (0, L) with homogeneous
/// Dirichlet conditions. Interior points u_j = j L / (J + 1), j = 1..J.
///
/// The H inner product is the h-weighted sum <a, b> = h sum_j a_j b_j. The
/// sine coefficients c_k = <x, e_k> are taken against the eigenfunctions
/// e_k(u) = sqrt(2/L) sin(k pi u / L) of the 3-point Dirichlet Laplacian,
/// which are h-orthonormal on the grid, so ||x||_H^2 = sum_k c_k^2.
template <typename ScalarT = double>
class BasicSpectralSpace {
 public:
  using Scalar = ScalarT;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  /// Largest J for which the transform matrix is stored; above this the
  /// transform is evaluated matrix-free.
  static constexpr int kDenseLimit = 1024;

  explicit BasicSpectralSpace(const SpaceConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int J = cfg.J;
    h_ = Scalar(cfg.domain_length) / Scalar(J + 1);
    grid_.resize(J);
    mu_.resize(J);
    for (int j = 0; j < J; ++j) {
      grid_[j] = Scalar(j + 1) * h_;
      const Scalar s = std::sin(std::numbers::pi_v<Scalar> * Scalar(j + 1) / Scalar(2 * (J + 1)));
      mu_[j] = Scalar(4) / (h_ * h_) * s * s;
    }
    if (J <= kDenseLimit) {
      basis_.resize(J, J);
      const Scalar norm = std::sqrt(Scalar(2) / Scalar(J + 1));
      for (int j = 0; j < J; ++j)
        for (int k = 0; k < J; ++k)
          basis_(j, k) = norm * std::sin(std::numbers::pi_v<Scalar> * Scalar((j + 1) * (k + 1)) / Scalar(J + 1));
    }
  }

  const SpaceConfig& config() const { return cfg_; }
  int size() const { return cfg_.J; }
  Scalar h() const { return h_; }
  Scalar length() const { return Scalar(cfg_.domain_length); }
  Scalar q() const { return Scalar(cfg_.q); }
  const Vector& grid() const { return grid_; }

  /// Discrete Dirichlet-Laplacian eigenvalues mu_k, k = 1..J, increasing.
  const Vector& eigenvalues() const { return mu_; }

  /// mu_k^{-order} for the dual-space weights.
  Vector weights(Space s) const {
    switch (s) {
      case Space::H:
        return Vector::Ones(size());
      case Space::X:
        return mu_.array().inverse();
      case Space::V:
        return mu_.array().pow(-Scalar(cfg_.dual_order_V));
      case Space::Y:
        break;
    }
    throw UsageError("Y norm has no spectral weights");
  }

  void check_dim(Eigen::Index n) const {
    if (n != size()) {
      std::ostringstream os;
      os << "field dimension " << n << " does not match space J = " << size();
      throw ConfigError(os.str());
    }
  }

  /// Sine coefficients of grid values. Works columnwise on matrices.
  template <typename Derived>
  Matrix to_sine(const Eigen::MatrixBase<Derived>& x) const {
    check_dim(x.rows());
    return std::sqrt(h_) * apply_basis(x);
  }

  /// Grid values from sine coefficients (inverse of to_sine).
  template <typename Derived>
  Matrix from_sine(const Eigen::MatrixBase<Derived>& c) const {
    check_dim(c.rows());
    return apply_basis(c) / std::sqrt(h_);
  }

  /// Grid values of the h-orthonormal eigenfunction of mode k (1-based).
  Vector eigenfunction(int k) const {
    if (k < 1 || k > size()) throw UsageError("eigenfunction index out of range");
    Vector e(size());
    const Scalar a = std::sqrt(Scalar(2) / length());
    for (int j = 0; j < size(); ++j) e[j] = a * std::sin(Scalar(k) * std::numbers::pi_v<Scalar> * grid_[j] / length());
    return e;
  }

  template <typename Da, typename Db>
  Scalar inner_H(const Eigen::MatrixBase<Da>& a, const Eigen::MatrixBase<Db>& b) const {
    check_dim(a.size());
    check_dim(b.size());
    return h_ * a.dot(b);
  }

  /// X = W^{-1,2} inner product, <(-Delta_h)^{-1} a, b>_H.
  template <typename Da, typename Db>
  Scalar inner_X(const Eigen::MatrixBase<Da>& a, const Eigen::MatrixBase<Db>& b) const {
    const Vector ca = to_sine(a);
    const Vector cb = to_sine(b);
    return (ca.array() * cb.array() / mu_.array()).sum();
  }

  template <typename Derived>
  Scalar norm(const Eigen::MatrixBase<Derived>& x, Space s) const {
    check_dim(x.size());
    switch (s) {
      case Space::H:
        return std::sqrt(h_ * x.squaredNorm());
      case Space::Y:
        return std::pow(h_ * abs_pow_sum(x, q()), Scalar(1) / q());
      case Space::X:
      case Space::V: {
        const Vector c = to_sine(x);
        return std::sqrt((weights(s).array() * c.array().square()).sum());
      }
    }
    return Scalar(0);
  }

  /// 3-point Dirichlet Laplacian.
  template <typename Derived>
  Vector laplacian(const Eigen::MatrixBase<Derived>& x) const {
    check_dim(x.size());
    const int J = size();
    Vector out(J);
    const Scalar inv_h2 = Scalar(1) / (h_ * h_);
    for (int j = 0; j < J; ++j) {
      const Scalar left = j > 0 ? x[j - 1] : Scalar(0);
      const Scalar right = j + 1 < J ? x[j + 1] : Scalar(0);
      out[j] = (left - Scalar(2) * x[j] + right) * inv_h2;
    }
    return out;
  }

  /// Delta_h^{-1} via the spectral representation.
  template <typename Derived>
  Vector inverse_laplacian(const Eigen::MatrixBase<Derived>& x) const {
    const Vector c = to_sine(x);
    const Vector scaled = -(c.array() / mu_.array()).matrix();
    return from_sine(scaled);
  }

  /// Norm of Y* = (L^q)^*, realized through the isometry
  /// Delta: L^{q/(q-1)} -> Y*, i.e. ||z||_{Y*} = ||Delta_h^{-1} z||_{L^{q'}}.
  template <typename Derived>
  Scalar ystar_norm(const Eigen::MatrixBase<Derived>& z) const {
    const Vector w = inverse_laplacian(z);
    const Scalar qc = q() / (q() - Scalar(1));
    return std::pow(h_ * abs_pow_sum(w, qc), Scalar(1) / qc);
  }

  /// Discrete int |grad(|y|^{q/2-1} y)|^2 du with one-sided differences
  /// over the J+1 edges and zero ghost values at both ends.
  template <typename Derived>
  Scalar nfunctional(const Eigen::MatrixBase<Derived>& y) const {
    check_dim(y.size());
    const Vector phi = signed_pow(y, q() / Scalar(2));
    const int J = size();
    Scalar acc = phi[0] * phi[0] + phi[J - 1] * phi[J - 1];
    for (int j = 0; j + 1 < J; ++j) {
      const Scalar d = phi[j + 1] - phi[j];
      acc += d * d;
    }
    return acc / h_;
  }

  /// N_p(y) = ||y||_H^{2(p-1)} N(y).
  template <typename Derived>
  Scalar n_p(const Eigen::MatrixBase<Derived>& y, Scalar p) const {
    const Scalar hn = norm(y, Space::H);
    return std::pow(hn, Scalar(2) * (p - Scalar(1))) * nfunctional(y);
  }

 private:
  template <typename Derived>
  Matrix apply_basis(const Eigen::MatrixBase<Derived>& x) const {
    if (basis_.size() > 0) return basis_ * x;
    // Matrix-free: the basis is symmetric.
    const int J = size();
    const Scalar norm = std::sqrt(Scalar(2) / Scalar(J + 1));
    Matrix out = Matrix::Zero(J, x.cols());
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < J; ++k) {
        const Scalar s = norm * std::sin(std::numbers::pi_v<Scalar> * Scalar((j + 1) * (k + 1)) / Scalar(J + 1));
        out.row(j) += s * x.row(k);
      }
    return out;
  }

  SpaceConfig cfg_;
  Scalar h_{};
  Vector grid_;
  Vector mu_;
  Matrix basis_;
};

using SpectralSpace = BasicSpectralSpace<double>;

/// A time-sampled path in Omega: states.col(m) is the field at times[m].
struct PathSample {
  std::vector<double> times;
  Eigen::MatrixXd states;

  /// Throws UsageError unless 0 = t_0 < ... < t_M = T.
  void validate(double T) const;
};

bool same_grid(const std::vector<double>& a, const std::vector<double>& b);

/// Trapezoidal integral of samples over times.
double trapezoid(const std::vector<double>& times, const Eigen::Ref<const Eigen::VectorXd>& values);

/// d(a, b) = max_m ||a_m - b_m||_V + (int ||a - b||_Y^alpha dt)^{1/alpha}, with
/// the time integral by the trapezoidal rule on the shared grid.
double path_metric(const SpectralSpace& space, const PathSample& a, const PathSample& b, double alpha);

}  // namespace mvlab
