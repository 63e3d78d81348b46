#include "mvlab/particle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mvlab {

namespace {

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::vector<double> output_grid(double T, int M) {
  std::vector<double> t(M + 1);
  for (int m = 0; m <= M; ++m) t[m] = T * m / M;
  t[M] = T;
  return t;
}

enum class MeasureMode { Particles, Frozen };

Ensemble run_system(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                    const Eigen::VectorXd& x0, MeasureMode mode, const MeasureFlow* flow) {
  const SpectralSpace& space = cs.space();
  const int J = space.size();
  const int K = cs.actions().size();
  space.check_dim(x0.size());
  cfg.validate(J);
  control.validate(K, cfg.M_steps);

  const double T = space.config().constants.T;
  const int M = cfg.M_steps;
  const int n = cfg.n_particles;
  const int nm = cfg.noise_modes == 0 ? J : cfg.noise_modes;
  const std::vector<double> times = output_grid(T, M);
  if (flow && !same_grid(flow->times, times)) throw UsageError("frozen flow does not share the output grid");

  // Grid values of the leading eigenfunctions (columns).
  const Eigen::MatrixXd modes = space.from_sine(Eigen::MatrixXd::Identity(J, J)).leftCols(nm);
  const bool constant_sigma = cs.constant_sigma();
  const EmpiricalFieldMeasure x0_law = EmpiricalFieldMeasure::dirac(x0);
  const Eigen::VectorXd sigma0 = cs.sigma(0, 0.0, x0, x0_law);
  const Eigen::MatrixXd noise_map = modes * sigma0.head(nm).asDiagonal();

  Ensemble e;
  e.init_x = x0;
  e.seed = cfg.rng_seed;
  e.diagnostics.noise_tail = sigma0.tail(J - nm).squaredNorm();
  e.diagnostics.min_dt = std::numeric_limits<double>::infinity();
  e.paths.resize(n);
  for (auto& p : e.paths) {
    p.path.times = times;
    p.path.states.resize(J, M + 1);
    p.path.states.col(0) = x0;
    p.control.times = times;
    p.control.cell_probs = Eigen::MatrixXd::Zero(M, K);
  }

  Eigen::MatrixXd Y = x0.replicate(1, n);
  const StreamKey base = cfg.stream_key();
  std::uint64_t step = 0;

  for (int m = 0; m < M; ++m) {
    const double t_start = times[m], t_end = times[m + 1], cell = t_end - t_start;
    const int fixed_sub = cfg.dt_policy == DtPolicy::Fixed
                              ? std::max(1, static_cast<int>(std::ceil(cell / cfg.base_dt - 1e-9)))
                              : 0;
    double t = t_start;
    int sub = 0;
    while (t < t_end) {
      double dt;
      if (cfg.dt_policy == DtPolicy::Fixed) {
        dt = cell / fixed_sub;
      } else {
        dt = std::min(adaptive_dt(Y.cwiseAbs().maxCoeff(), cfg, space), t_end - t);
        if (t_end - (t + dt) < 1e-12 * cell) dt = t_end - t;
      }
      const EmpiricalFieldMeasure mu =
          mode == MeasureMode::Particles ? EmpiricalFieldMeasure::uniform(Y) : flow->at(t);
      double system_scale = 1.0;
      if (cfg.cutoff_m && mode == MeasureMode::Particles)
        system_scale = cutoff(std::sqrt(space.h() * Y.squaredNorm()), *cfg.cutoff_m);
      const double sqdt = std::sqrt(dt);

#pragma omp parallel for schedule(static)
      for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd y = Y.col(k);
        const Eigen::VectorXd p = control.evaluate(m, y, space, K);
        double scale = system_scale;
        if (cfg.cutoff_m && mode == MeasureMode::Frozen) scale = cutoff(space.norm(y, Space::H), *cfg.cutoff_m);
        Eigen::VectorXd xi(nm);
        fill_normals(base.with_particle(static_cast<std::uint64_t>(k)).with_step(step), xi);
        Eigen::VectorXd noise;
        if (constant_sigma) {
          noise = noise_map * xi;
        } else {
          const Eigen::VectorXd s = cs.sigma_bar(p, t, y, mu);
          noise = modes * s.head(nm).cwiseProduct(xi);
        }
        Y.col(k) = y + scale * (dt * cs.drift_mixed(p, t, y, mu) + sqdt * noise);
        e.paths[k].control.cell_probs.row(m) += dt * p.transpose();
      }

      for (int k = 0; k < n; ++k) {
        const double nrm = space.norm(Y.col(k), Space::H);
        if (!std::isfinite(nrm) || nrm > cfg.blowup_ceiling) {
          std::ostringstream os;
          os << "blow-up: ||Y^" << k << "||_H = " << nrm << " exceeds " << cfg.blowup_ceiling << " at step " << step
             << " (t = " << t + dt << "); reduce base_dt or use the adaptive dt policy";
          throw BlowUpError(os.str(), step, t + dt);
        }
      }
      ++sub;
      ++step;
      e.diagnostics.min_dt = std::min(e.diagnostics.min_dt, dt);
      e.diagnostics.max_dt = std::max(e.diagnostics.max_dt, dt);
      t = cfg.dt_policy == DtPolicy::Fixed ? (sub == fixed_sub ? t_end : t_start + sub * dt) : t + dt;
    }
    for (int k = 0; k < n; ++k) {
      e.paths[k].path.states.col(m + 1) = Y.col(k);
      auto row = e.paths[k].control.cell_probs.row(m);
      row /= row.sum();
    }
  }
  e.diagnostics.substeps = step;
  return e;
}

}  // namespace

void SimConfig::validate(int J) const {
  if (n_particles < 1) throw ConfigError("sim.n_particles must be >= 1");
  if (M_steps < 1) throw ConfigError("sim.M_steps must be >= 1");
  if (!(base_dt > 0)) throw ConfigError("sim.base_dt must be > 0");
  if (noise_modes < 0 || noise_modes > J) throw ConfigError("sim.noise_modes must lie in [0, J]");
  if (cutoff_m && !(*cutoff_m > 0)) throw ConfigError("sim.cutoff_m must be > 0");
  if (!(blowup_ceiling > 0)) throw ConfigError("sim.blowup_ceiling must be > 0");
}

double adaptive_dt(double y_max_abs, const SimConfig& cfg, const SpectralSpace& space) {
  const double q = space.q();
  const double h = space.h();
  const double cap = 0.25 * h * h / ((q - 1.0) * std::pow(std::max(1.0, y_max_abs), q - 2.0));
  return std::min(cfg.base_dt, cap);
}

double cutoff(double r, double m) {
  r = std::abs(r);
  if (r <= m) return 1.0;
  if (r >= 2 * m) return 0.0;
  const double s = (r - m) / m;
  const double a = std::exp(-1.0 / (1.0 - s));
  const double b = std::exp(-1.0 / s);
  return a / (a + b);
}

Eigen::MatrixXd Ensemble::slice(Eigen::Index m) const {
  if (paths.empty()) throw UsageError("empty ensemble");
  if (m < 0 || m > steps()) throw UsageError("time index out of range");
  Eigen::MatrixXd out(paths.front().path.states.rows(), static_cast<Eigen::Index>(paths.size()));
  for (std::size_t k = 0; k < paths.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = paths[k].path.states.col(m);
  return out;
}

Ensemble Ensemble::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != paths.size()) throw UsageError("permutation size mismatch");
  Ensemble e = *this;
  for (std::size_t k = 0; k < perm.size(); ++k) e.paths[k] = paths.at(perm[k]);
  return e;
}

MeasureFlow MeasureFlow::from_ensemble(const Ensemble& e) {
  MeasureFlow f;
  f.times = e.times();
  const Eigen::Index M = e.steps();
  f.means.resize(e.init_x.size(), M + 1);
  f.clouds.reserve(static_cast<std::size_t>(M + 1));
  for (Eigen::Index m = 0; m <= M; ++m) {
    f.clouds.push_back(EmpiricalFieldMeasure::uniform(e.slice(m)));
    f.means.col(m) = f.clouds.back().mean();
  }
  return f;
}

EmpiricalFieldMeasure MeasureFlow::at(double t) const {
  if (times.empty()) throw UsageError("empty measure flow");
  if (t <= times.front()) return clouds.front();
  if (t >= times.back()) return clouds.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto m = static_cast<std::size_t>(it - times.begin()) - 1;
  const double theta = (t - times[m]) / (times[m + 1] - times[m]);
  if (theta == 0.0) return clouds[m];
  return EmpiricalFieldMeasure((1.0 - theta) * clouds[m].atoms() + theta * clouds[m + 1].atoms(),
                               clouds[m].weights());
}

Eigen::VectorXd MeasureFlow::mean_at(double t) const { return at(t).mean(); }

Ensemble simulate_particles(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                            const Eigen::VectorXd& x0) {
  return run_system(cs, control, cfg, x0, MeasureMode::Particles, nullptr);
}

Ensemble simulate_frozen(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                         const Eigen::VectorXd& x0, const MeasureFlow& flow) {
  return run_system(cs, control, cfg, x0, MeasureMode::Frozen, &flow);
}

double log_moment_bound(double x_norm, double p, const ModelConstants& c) {
  return std::log1p(2.0 * std::pow(x_norm, 2.0 * p)) + 6.0 * c.lambda * p * c.T * (1.0 + 18.0 * p);
}

double log_jhat(double x_norm, const ModelConstants& c) {
  const double l = c.lambda, T = c.T, eta = c.eta, beta = c.beta;
  const double a = 6.0 * l * eta * T * (1.0 + 18.0 * eta) + std::log1p(2.0 * std::pow(x_norm, 2.0 * eta));
  const double x2 = x_norm * x_norm;
  const double b = std::log(0.5) + logaddexp(std::log(x2 + 3.0 * l * T),
                                             std::log(9.0 * l * T * (1.0 + 2.0 * x2)) + 114.0 * l * T);
  const double e = beta / 2.0 + 1.0;
  const double xb = std::pow(x_norm, beta + 2.0);
  const double base = l * e * T * (beta + 3.0);
  const double cterm = -std::log(beta + 2.0) +
                       logaddexp(std::log(xb + base),
                                 std::log(3.0 * base * (1.0 + 2.0 * xb)) + 6.0 * l * e * T * (9.0 * beta + 19.0));
  return logaddexp(logaddexp(a, b), cterm);
}

bool MomentReport::pass() const {
  return j_pass && std::all_of(lines.begin(), lines.end(), [](const MomentLine& l) { return l.pass; });
}

nlohmann::json MomentReport::to_json() const {
  nlohmann::json j;
  for (const auto& l : lines)
    j["moments"].push_back({{"p", l.p}, {"empirical", l.empirical}, {"log_bound", l.log_bound}, {"pass", l.pass}});
  j["integral_N"] = integral_n;
  j["integral_N_beta"] = integral_n_beta;
  j["J_functional"] = j_functional;
  j["log_jhat"] = log_jhat;
  j["J_pass"] = j_pass;
  j["pass"] = pass();
  return j;
}

MomentReport moment_report(const SpectralSpace& space, const Ensemble& e, const std::vector<double>& p_list,
                           const ModelConstants& constants) {
  if (e.size() == 0) throw UsageError("moment_report: empty ensemble");
  const auto& times = e.times();
  const Eigen::Index M = e.steps();
  const double n = static_cast<double>(e.size());
  const double pb = constants.beta / 2.0 + 1.0;
  std::vector<double> sup_norm(e.size());
  MomentReport r;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const auto& S = e.paths[k].path.states;
    Eigen::VectorXd nf(M + 1), nb(M + 1);
    double s = 0.0;
    for (Eigen::Index m = 0; m <= M; ++m) {
      s = std::max(s, space.norm(S.col(m), Space::H));
      nf[m] = space.nfunctional(S.col(m));
      nb[m] = space.n_p(S.col(m), pb);
    }
    sup_norm[k] = s;
    r.integral_n += trapezoid(times, nf) / n;
    r.integral_n_beta += trapezoid(times, nb) / n;
  }
  const double x = space.norm(e.init_x, Space::H);
  for (double p : p_list) {
    if (!(p >= 1)) throw UsageError("moment_report: p must be >= 1");
    MomentLine l;
    l.p = p;
    for (double s : sup_norm) l.empirical += std::pow(s, 2.0 * p) / n;
    l.log_bound = log_moment_bound(x, p, constants);
    l.pass = l.empirical == 0.0 || std::log(l.empirical) <= l.log_bound;
    r.lines.push_back(l);
  }
  double sup_eta = 0.0;
  for (double s : sup_norm) sup_eta += std::pow(s, 2.0 * constants.eta) / n;
  r.j_functional = sup_eta + r.integral_n + r.integral_n_beta;
  r.log_jhat = log_jhat(x, constants);
  r.j_pass = r.j_functional == 0.0 || std::log(r.j_functional) <= r.log_jhat;
  return r;
}

}  // namespace mvlab
