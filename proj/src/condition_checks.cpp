#include <algorithm>
#include <cmath>
#include <limits>

#include "mvlab/coefficients.hpp"
#include "mvlab/measures.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

namespace {

struct Sampler {
  const SpectralSpace& space;
  const FieldSampler& cfg;

  Eigen::VectorXd field(CounterStream& s, double scale = 1.0) const {
    const int J = space.size();
    Eigen::VectorXd c(J);
    for (int j = 0; j < J; ++j) c[j] = scale * cfg.scale * s.next_normal() * std::pow(double(j + 1), -cfg.decay);
    return space.from_sine(c);
  }

  EmpiricalFieldMeasure measure(CounterStream& s) const {
    const int atoms = 1 + static_cast<int>(s.next_u32() % static_cast<std::uint32_t>(cfg.max_atoms));
    Eigen::MatrixXd A(space.size(), atoms);
    for (int i = 0; i < atoms; ++i) A.col(i) = field(s);
    return EmpiricalFieldMeasure::uniform(std::move(A));
  }

  Eigen::VectorXd simplex(CounterStream& s, int K) const {
    Eigen::VectorXd p(K);
    for (int k = 0; k < K; ++k) p[k] = -std::log(s.next_uniform());
    return p / p.sum();
  }
};

// Per-sample (lhs, rhs-base, offset) so that the inequality reads
// lhs <= K * base - offset.
struct Term {
  double lhs = 0.0;
  double base = 0.0;
  double offset = 0.0;
};

InequalityReport reduce(const std::string& name, const std::vector<Term>& terms, double constant) {
  InequalityReport r;
  r.name = name;
  r.samples = terms.size();
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& t : terms) {
    const double margin = constant * t.base - t.offset - t.lhs;
    const double slack = 1e-12 * (1.0 + std::abs(t.lhs) + std::abs(constant * t.base) + std::abs(t.offset));
    if (margin < -slack) ++r.violations;
    r.worst_margin = std::min(r.worst_margin, margin);
    const double need = t.lhs + t.offset;
    if (need > 0) {
      const double k = t.base > 0 ? need / t.base : std::numeric_limits<double>::infinity();
      r.min_feasible_constant = std::max(r.min_feasible_constant, k);
    }
  }
  return r;
}

double sigma_hs(const Eigen::VectorXd& s) { return std::sqrt(hs_norm_sq(s)); }

}  // namespace

std::size_t ConditionReport::total_violations() const {
  std::size_t v = 0;
  for (const auto& i : inequalities) v += i.violations;
  return v;
}

double ConditionReport::min_feasible_constant() const {
  double c = 0.0;
  for (const auto& i : inequalities) c = std::max(c, i.min_feasible_constant);
  return c;
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json j;
  j["condition"] = condition;
  j["constant_used"] = constant_used;
  j["seed"] = seed;
  j["total_violations"] = total_violations();
  j["min_feasible_constant"] = min_feasible_constant();
  j["continuity_modulus"] = continuity_modulus;
  for (const auto& i : inequalities)
    j["inequalities"].push_back({{"name", i.name},
                                 {"samples", i.samples},
                                 {"violations", i.violations},
                                 {"worst_margin", i.worst_margin},
                                 {"min_feasible_constant", i.min_feasible_constant}});
  return j;
}

ConditionReport check_condition_main1(const CoefficientSet& cs, const ModelConstants& constants, double lambda,
                                      std::size_t samples, std::uint64_t seed, const CheckOptions& opts) {
  const SpectralSpace& space = cs.space();
  const Sampler sampler{space, opts.sampler};
  const int K = cs.actions().size();
  const double gamma = constants.gamma, beta = constants.beta;
  std::vector<Term> coe(samples), growth(samples), diff(samples);
  const StreamKey base{seed, lane_id("condition_main1"), 0, 0, 0};

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < samples; ++i) {
    CounterStream s(base.with_particle(i));
    const int f = static_cast<int>(s.next_u32() % static_cast<std::uint32_t>(K));
    const double t = s.next_uniform() * constants.T;
    const Eigen::VectorXd w = sampler.field(s);
    const EmpiricalFieldMeasure mu = sampler.measure(s);
    const Eigen::VectorXd nu = sampler.simplex(s, K);
    const double wH = space.norm(w, Space::H);
    const double m2 = mu.moment(space, 2.0), mb = mu.moment(space, beta);
    const double nw = space.nfunctional(w);

    const Eigen::VectorXd b = cs.drift(f, t, w, mu);
    coe[i] = {space.inner_H(b, w), 1.0 + wH * wH + m2 * m2, opts.include_n_term ? nw : 0.0};

    const double sg = sigma_hs(cs.sigma(f, t, w, mu));
    growth[i] = {std::pow(sg, 2 * gamma) + std::pow(space.norm(b, Space::V), gamma),
                 (1.0 + nw) * (1.0 + std::pow(wH, beta)) + std::pow(mb, beta), 0.0};

    const double sb = sigma_hs(cs.sigma_bar(nu, t, w, mu));
    diff[i] = {sb * sb, 1.0 + wH * wH + m2 * m2, 0.0};
  }

  ConditionReport r;
  r.condition = "main1";
  r.constant_used = lambda;
  r.seed = seed;
  r.inequalities.push_back(reduce("coercivity", coe, lambda));
  r.inequalities.push_back(reduce("drift_growth", growth, lambda));
  r.inequalities.push_back(reduce("diffusion_growth", diff, lambda));
  return r;
}

ConditionReport check_condition_main2(const CoefficientSet& cs, const ModelConstants& constants, double C,
                                      std::size_t samples, std::uint64_t seed, const CheckOptions& opts) {
  const SpectralSpace& space = cs.space();
  const Sampler sampler{space, opts.sampler};
  const int K = cs.actions().size();
  const double alpha = constants.alpha, beta = constants.beta;
  std::vector<Term> ystar(samples), mono(samples), lip(samples);
  std::vector<double> modulus(samples, 0.0);
  const StreamKey base{seed, lane_id("condition_main2"), 0, 0, 0};
  const Eigen::VectorXd probe = space.eigenfunction(1);

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < samples; ++i) {
    CounterStream s(base.with_particle(i));
    const int f = static_cast<int>(s.next_u32() % static_cast<std::uint32_t>(K));
    const double t = s.next_uniform() * constants.T;
    const Eigen::VectorXd y = sampler.field(s);
    // Every other sample probes nearby pairs, where monotonicity is tightest.
    const Eigen::VectorXd v = i % 2 == 0 ? sampler.field(s) : (y + sampler.field(s, 0.05)).eval();
    const EmpiricalFieldMeasure mu = sampler.measure(s);
    const EmpiricalFieldMeasure mu_star = sampler.measure(s);
    const Eigen::VectorXd nu = sampler.simplex(s, K);

    const Eigen::VectorXd by = cs.drift(f, t, y, mu);
    const double yH = space.norm(y, Space::H);
    const double mb = mu.moment(space, beta);
    ystar[i] = {std::pow(space.ystar_norm(by), alpha / (alpha - 1.0)),
                (1.0 + space.nfunctional(y)) * (1.0 + std::pow(yH, beta)) + std::pow(mb, beta), 0.0};

    const Eigen::VectorXd bv = cs.drift(f, t, v, mu_star);
    const Eigen::VectorXd d = y - v;
    const double dX = space.norm(d, Space::X);
    const double w2 = wasserstein_fields(space, mu, mu_star, 2.0, Space::X);
    const double rhs = dX * dX + w2 * w2;
    mono[i] = {space.inner_X((by - bv).eval(), d), rhs, 0.0};

    const Eigen::VectorXd sy = cs.sigma_bar(nu, t, y, mu);
    const Eigen::VectorXd sv = cs.sigma_bar(nu, t, v, mu_star);
    const double lip_lhs = ((sy - sv).array().square() / space.eigenvalues().array()).sum();
    lip[i] = {lip_lhs, rhs, 0.0};

    const double wv = wasserstein_fields(space, mu, mu_star, constants.rho, Space::V);
    const Eigen::VectorXd b_star = cs.drift(f, t, y, mu_star);
    if (wv > 0) modulus[i] = std::abs(space.inner_H((by - b_star).eval(), probe)) / wv;
  }

  ConditionReport r;
  r.condition = "main2";
  r.constant_used = C;
  r.seed = seed;
  r.inequalities.push_back(reduce("ystar_growth", ystar, C));
  r.inequalities.push_back(reduce("weak_monotonicity", mono, C));
  r.inequalities.push_back(reduce("sigma_bar_lipschitz", lip, C));
  r.continuity_modulus = samples ? *std::max_element(modulus.begin(), modulus.end()) : 0.0;
  return r;
}

CalibratedConstants calibrate_constants(const CoefficientSet& cs, const ModelConstants& constants,
                                        std::size_t samples, std::uint64_t seed, double margin,
                                        const CheckOptions& opts) {
  if (!(margin >= 1)) throw UsageError("calibration margin must be >= 1");
  const auto r1 = check_condition_main1(cs, constants, 1.0, samples, seed, opts);
  const auto r2 = check_condition_main2(cs, constants, 1.0, samples, seed, opts);
  CalibratedConstants c;
  // A zero requirement (e.g. vanishing noise) still needs a positive constant.
  c.lambda = margin * std::max(r1.min_feasible_constant(), 1e-12);
  c.C = margin * std::max(r2.min_feasible_constant(), 1e-12);
  return c;
}

std::size_t scalar_monotonicity_violations(double q, std::size_t pairs, std::uint64_t seed) {
  CounterStream s(StreamKey{seed, lane_id("scalar_monotonicity"), 0, 0, 0});
  std::size_t bad = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double a = 10.0 * (2.0 * s.next_uniform() - 1.0);
    const double b = 10.0 * (2.0 * s.next_uniform() - 1.0);
    if ((signed_pow(a, q - 1.0) - signed_pow(b, q - 1.0)) * (a - b) < 0) ++bad;
  }
  return bad;
}

}  // namespace mvlab
