#include "mvlab/diagnostics.hpp"

#include <cmath>
#include <sstream>

namespace mvlab {

double ScalarTest::value(double x) const { return offset + shape(x); }

double ScalarTest::shape(double x) const {
  switch (kind) {
    case Kind::Bump: {
      const double u = (x - center) / width;
      if (std::abs(u) >= 1.0) return 0.0;
      return std::exp(1.0 - 1.0 / (1.0 - u * u));
    }
    case Kind::SaturatedQuadratic: {
      const double r2 = width * width;
      return r2 * x * x / (r2 + x * x);
    }
    case Kind::Linear:
      return x;
  }
  return 0.0;
}

double ScalarTest::d1(double x) const {
  switch (kind) {
    case Kind::Bump: {
      const double u = (x - center) / width;
      if (std::abs(u) >= 1.0) return 0.0;
      const double a = 1.0 - u * u;
      return shape(x) * (-2.0 * u / (a * a)) / width;
    }
    case Kind::SaturatedQuadratic: {
      const double r2 = width * width, d = r2 + x * x;
      return 2.0 * r2 * r2 * x / (d * d);
    }
    case Kind::Linear:
      return 1.0;
  }
  return 0.0;
}

double ScalarTest::d2(double x) const {
  switch (kind) {
    case Kind::Bump: {
      const double u = (x - center) / width;
      if (std::abs(u) >= 1.0) return 0.0;
      const double a = 1.0 - u * u;
      const double p1 = -2.0 * u / (a * a);
      const double p2 = -2.0 / (a * a) - 8.0 * u * u / (a * a * a);
      return shape(x) * (p1 * p1 + p2) / (width * width);
    }
    case Kind::SaturatedQuadratic: {
      const double r2 = width * width, d = r2 + x * x;
      return 2.0 * r2 * r2 * (r2 - 3.0 * x * x) / (d * d * d);
    }
    case Kind::Linear:
      return 0.0;
  }
  return 0.0;
}

double noise_quadratic(const Eigen::VectorXd& s, const SpectralSpace& space, const Eigen::VectorXd& y,
                       int noise_modes) {
  const Eigen::Index nm = noise_modes == 0 ? space.size() : noise_modes;
  const Eigen::VectorXd c = space.to_sine(y);
  return (s.head(nm).array() * c.head(nm).array()).square().sum();
}

double generator_eval(const GeneratorSpec& spec, const CoefficientSet& cs, const Eigen::VectorXd& nu, double t,
                      const Eigen::VectorXd& v, const EmpiricalFieldMeasure& mu, int noise_modes) {
  const auto& sp = cs.space();
  const double a = sp.inner_H(v, spec.y);
  const double drift = sp.inner_H(cs.drift_mixed(nu, t, v, mu), spec.y);
  const double g2 = spec.g.d2(a);
  const double diff = g2 == 0.0 ? 0.0 : noise_quadratic(cs.sigma_bar(nu, t, v, mu), sp, spec.y, noise_modes);
  return spec.g.d1(a) * drift + 0.5 * g2 * diff;
}

std::vector<GeneratorSpec> builtin_panel(const SpectralSpace& space, Eigen::Index s_index, Eigen::Index t_index) {
  const int J = space.size();
  if (J < 5) throw ConfigError("builtin_panel: needs J >= 5");
  Eigen::VectorXd comb = space.eigenfunction(1) + 0.5 * space.eigenfunction(3) - 0.25 * space.eigenfunction(5);
  comb /= space.norm(comb, Space::H);
  Eigen::VectorXd loc(J);
  for (int i = 0; i < J; ++i) {
    const double u = space.h() * (i + 1);
    loc[i] = std::exp(-(u - 0.3) * (u - 0.3) / (2 * 0.05 * 0.05));
  }
  loc /= space.norm(loc, Space::H);

  using K = ScalarTest::Kind;
  const ScalarTest bump_a{K::Bump, 0.5, 1.0}, bump_b{K::Bump, 0.0, 1.5};
  const ScalarTest quad_a{K::SaturatedQuadratic, 0.0, 1.0}, quad_b{K::SaturatedQuadratic, 0.0, 2.0};
  const Eigen::VectorXd e1 = space.eigenfunction(1), e2 = space.eigenfunction(2);
  std::vector<GeneratorSpec> out{
      {"bump_a/e1", bump_a, e1},     {"bump_a/e2", bump_a, e2},     {"bump_b/comb", bump_b, comb},
      {"bump_b/local", bump_b, loc}, {"quad_a/e1", quad_a, e1},     {"quad_a/e2", quad_a, e2},
      {"quad_b/comb", quad_b, comb}, {"quad_b/local", quad_b, loc},
  };
  for (auto& s : out) {
    s.s_index = s_index;
    s.t_index = t_index;
  }
  return out;
}

namespace {

void check_single_step(const Ensemble& e) {
  if (e.diagnostics.substeps != static_cast<std::uint64_t>(e.steps()))
    throw UsageError("martingale_residual: the ensemble must use one Euler step per output cell");
}

double past_weight(PastWeight w, const SpectralSpace& space, const Eigen::VectorXd& xs) {
  switch (w) {
    case PastWeight::One:
      return 1.0;
    case PastWeight::Zero:
      return 0.0;
    case PastWeight::TanhFirstMode:
      return 1.0 + std::tanh(space.inner_H(xs, space.eigenfunction(1)));
  }
  return 1.0;
}

/// values(i, k): (M_t - M_s) psi_s of spec i on particle k.
Eigen::MatrixXd residual_values(const std::vector<GeneratorSpec>& specs, const CoefficientSet& cs,
                                const Ensemble& e, const MeasureFlow* flow, int noise_modes) {
  const auto& sp = cs.space();
  check_single_step(e);
  const Eigen::Index M = e.steps();
  Eigen::Index lo = M, hi = 0;
  for (const auto& s : specs) {
    if (s.s_index < 0 || s.t_index > M || s.s_index >= s.t_index)
      throw UsageError("martingale_residual: need 0 <= s < t <= M for spec " + s.id);
    lo = std::min(lo, s.s_index);
    hi = std::max(hi, s.t_index);
  }
  if (flow && !same_grid(flow->times, e.times()))
    throw UsageError("martingale_residual: flow grid differs from the ensemble grid");

  const auto n = static_cast<Eigen::Index>(e.size());
  const auto S = static_cast<Eigen::Index>(specs.size());
  const Eigen::Index nm = noise_modes == 0 ? sp.size() : noise_modes;
  Eigen::MatrixXd Y(sp.size(), S);
  for (Eigen::Index i = 0; i < S; ++i) Y.col(i) = specs[i].y;
  const Eigen::MatrixXd Cy = sp.to_sine(Y).topRows(nm);
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(S, n);
  for (Eigen::Index m = lo; m < hi; ++m) {
    const double t = e.times()[m], dt = e.times()[m + 1] - t;
    const EmpiricalFieldMeasure mu =
        flow ? flow->clouds[static_cast<std::size_t>(m)] : empirical_state_measure(e, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& p = e.paths[static_cast<std::size_t>(k)];
      const Eigen::VectorXd v = p.path.states.col(m);
      const Eigen::VectorXd nu = p.control.cell_probs.row(m).transpose();
      const Eigen::VectorXd b = cs.drift_mixed(nu, t, v, mu);
      const Eigen::VectorXd s = cs.sigma_bar(nu, t, v, mu).head(nm);
      for (Eigen::Index i = 0; i < S; ++i) {
        if (m < specs[i].s_index || m >= specs[i].t_index) continue;
        const double a = sp.inner_H(v, Y.col(i));
        const double L = specs[i].g.d1(a) * sp.inner_H(b, Y.col(i)) +
                         0.5 * specs[i].g.d2(a) * (s.array() * Cy.col(i).array()).square().sum();
        comp(i, k) += dt * L;
      }
    }
  }
  Eigen::MatrixXd out(S, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& X = e.paths[static_cast<std::size_t>(k)].path.states;
    for (Eigen::Index i = 0; i < S; ++i) {
      const auto& sp_i = specs[i];
      const double w = past_weight(sp_i.weight, sp, X.col(sp_i.s_index));
      const double inc = sp_i.g.value(sp.inner_H(X.col(sp_i.t_index), sp_i.y)) -
                         sp_i.g.value(sp.inner_H(X.col(sp_i.s_index), sp_i.y)) - comp(i, k);
      out(i, k) = inc * w;
    }
  }
  return out;
}

ResidualEstimate summarize(const Eigen::RowVectorXd& v) {
  ResidualEstimate r;
  const double n = static_cast<double>(v.size());
  r.estimate = v.mean();
  r.se = v.size() > 1 ? std::sqrt((v.array() - r.estimate).square().sum() / (n - 1.0) / n) : 0.0;
  return r;
}

SimConfig single_step_config(const SimConfig& cfg, double T, int steps) {
  SimConfig c = cfg;
  c.M_steps = steps;
  c.replicate = 0;
  c.dt_policy = DtPolicy::Fixed;
  c.base_dt = T / steps;
  return c;
}

std::vector<GeneratorSpec> refined(std::vector<GeneratorSpec> specs) {
  for (auto& s : specs) {
    s.s_index *= 2;
    s.t_index *= 2;
  }
  return specs;
}

struct Run {
  Ensemble ensemble;
  MeasureFlow flow;
  bool has_flow = false;
};

Run run_source(const CoefficientSet& cs, const NamedControl& control, const SimConfig& c, const Eigen::VectorXd& x0,
               ResidualSource source, const PicardOptions& picard) {
  Run r;
  if (source == ResidualSource::Particles) {
    SimConfig pc = c;
    pc.experiment = lane_id("martingale_particles");
    r.ensemble = simulate_particles(cs, control, pc, x0);
    return r;
  }
  PicardOptions po = picard;
  po.flow_refine = 1;
  SimConfig mc = c;
  mc.experiment = lane_id("martingale_mean_field");
  mc.n_particles = po.n_cloud;
  r.flow = picard_mckean(cs, control, mc, x0, po).flow;
  r.ensemble = simulate_frozen(cs, control, mc, x0, r.flow);
  r.has_flow = true;
  return r;
}

}  // namespace

ResidualEstimate martingale_residual(const GeneratorSpec& spec, const CoefficientSet& cs, const Ensemble& e,
                                     const MeasureFlow* flow, int noise_modes) {
  return summarize(residual_values({spec}, cs, e, flow, noise_modes).row(0));
}

bool PanelReport::pass() const {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return !rows.empty();
}

nlohmann::json PanelReport::to_json() const {
  nlohmann::json j;
  j["source"] = source;
  j["pass"] = pass();
  for (const auto& r : rows)
    j["rows"].push_back({{"id", r.id}, {"estimate", r.estimate}, {"se", r.se}, {"bias", r.bias},
                         {"band", r.band}, {"pass", r.pass}});
  return j;
}

std::string PanelReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "spec,estimate,se,band,pass\n";
  for (const auto& r : rows) os << r.id << ',' << r.estimate << ',' << r.se << ',' << r.band << ',' << r.pass << '\n';
  return os.str();
}

PanelReport martingale_panel(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                             const Eigen::VectorXd& x0, const std::vector<GeneratorSpec>& specs, int steps,
                             ResidualSource source, const PicardOptions& picard) {
  if (steps < 1) throw ConfigError("martingale_panel: steps must be >= 1");
  const double T = cs.space().config().constants.T;
  const int nm = cfg.noise_modes;
  Eigen::MatrixXd coarse, fine;
  {
    const Run r = run_source(cs, control, single_step_config(cfg, T, steps), x0, source, picard);
    coarse = residual_values(specs, cs, r.ensemble, r.has_flow ? &r.flow : nullptr, nm);
  }
  {
    const Run r = run_source(cs, control, single_step_config(cfg, T, 2 * steps), x0, source, picard);
    fine = residual_values(refined(specs), cs, r.ensemble, r.has_flow ? &r.flow : nullptr, nm);
  }
  PanelReport rep;
  rep.source = source == ResidualSource::Particles ? "particles" : "mean_field";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto c = summarize(coarse.row(static_cast<Eigen::Index>(i)));
    const auto f = summarize(fine.row(static_cast<Eigen::Index>(i)));
    PanelRow row;
    row.id = specs[i].id;
    row.estimate = c.estimate;
    row.se = c.se;
    row.bias = 2.0 * std::abs(c.estimate - f.estimate);
    row.band = 3.0 * c.se + row.bias;
    row.pass = std::abs(c.estimate) <= row.band;
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<double> dt_halving_ratios(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                                      const Eigen::VectorXd& x0, const std::vector<GeneratorSpec>& specs, int steps) {
  const double T = cs.space().config().constants.T;
  SimConfig one = cfg;
  one.n_particles = 1;
  const Eigen::MatrixXd c =
      residual_values(specs, cs, simulate_particles(cs, control, single_step_config(one, T, steps), x0), nullptr,
                      cfg.noise_modes);
  const Eigen::MatrixXd f = residual_values(
      refined(specs), cs, simulate_particles(cs, control, single_step_config(one, T, 2 * steps), x0), nullptr,
      cfg.noise_modes);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < c.rows(); ++i) out.push_back(std::abs(c(i, 0)) / std::abs(f(i, 0)));
  return out;
}

}  // namespace mvlab
