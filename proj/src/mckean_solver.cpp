#include "mvlab/mckean_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvlab/measures.hpp"

namespace mvlab {

double PicardResult::contraction_ratio() const {
  std::vector<double> ratios;
  for (std::size_t i = 1; i < residuals.size(); ++i)
    if (residuals[i - 1] > 0 && residuals[i] > 0) ratios.push_back(residuals[i] / residuals[i - 1]);
  if (ratios.empty()) return 0.0;
  std::sort(ratios.begin(), ratios.end());
  const std::size_t k = ratios.size() / 2;
  return ratios.size() % 2 ? ratios[k] : 0.5 * (ratios[k - 1] + ratios[k]);
}

nlohmann::json PicardResult::to_json() const {
  nlohmann::json j;
  j["converged"] = converged;
  j["iterations"] = residuals.size();
  j["residuals"] = residuals;
  j["contraction_ratio"] = contraction_ratio();
  if (!converged) j["warning"] = "picard iteration did not reach tol; returning last iterate";
  return j;
}

double flow_residual(const SpectralSpace& space, const MeasureFlow& a, const MeasureFlow& b) {
  if (!same_grid(a.times, b.times)) throw UsageError("flow_residual: grids differ");
  const std::size_t T = a.times.size();
  std::vector<double> bound(T, std::numeric_limits<double>::infinity());
  for (std::size_t m = 0; m < T; ++m) {
    const auto& ca = a.clouds[m];
    const auto& cb = b.clouds[m];
    if (ca.size() == cb.size() && ca.weights() == cb.weights()) {
      const Eigen::MatrixXd fa = ground_features(space, ca.atoms(), Space::X);
      const Eigen::MatrixXd fb = ground_features(space, cb.atoms(), Space::X);
      bound[m] = std::sqrt(((fa - fb).colwise().squaredNorm().transpose().array() * ca.weights().array()).sum());
    }
  }
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return bound[i] > bound[j]; });
  double sup = 0.0;
  for (std::size_t m : order) {
    if (bound[m] <= sup) break;
    sup = std::max(sup, wasserstein_fields(space, a.clouds[m], b.clouds[m], 2.0, Space::X));
  }
  return sup;
}

Ensemble downsample(const Ensemble& e, int factor) {
  if (factor < 1 || e.steps() % factor != 0) throw UsageError("downsample factor must divide the step count");
  if (factor == 1) return e;
  Ensemble out = e;
  const Eigen::Index M = e.steps() / factor;
  std::vector<double> times(M + 1);
  for (Eigen::Index m = 0; m <= M; ++m) times[m] = e.times()[m * factor];
  for (std::size_t k = 0; k < e.size(); ++k) {
    const auto& src = e.paths[k];
    auto& dst = out.paths[k];
    dst.path.times = times;
    dst.control.times = times;
    dst.path.states.resize(src.path.states.rows(), M + 1);
    dst.control.cell_probs.resize(M, src.control.actions());
    for (Eigen::Index m = 0; m <= M; ++m) dst.path.states.col(m) = src.path.states.col(m * factor);
    for (Eigen::Index m = 0; m < M; ++m) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(src.control.actions());
      for (int s = 0; s < factor; ++s) {
        const Eigen::Index c = m * factor + s;
        const double dt = src.control.times[c + 1] - src.control.times[c];
        acc += dt * src.control.cell_probs.row(c);
      }
      dst.control.cell_probs.row(m) = acc / acc.sum();
    }
  }
  return out;
}

PicardResult picard_mckean(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                           const Eigen::VectorXd& x0, const PicardOptions& opts) {
  if (opts.n_cloud < 64) throw ConfigError("picard: n_cloud must be >= 64");
  if (!(opts.tol > 0)) throw ConfigError("picard: tol must be > 0");
  if (opts.max_iter < 1 || opts.flow_refine < 1) throw ConfigError("picard: max_iter and flow_refine must be >= 1");
  if (std::holds_alternative<FixedPathControl>(control.rule))
    throw ConfigError("picard: fixed-path controls are defined on the output grid only");

  SimConfig fine = cfg;
  fine.n_particles = opts.n_cloud;
  fine.M_steps = cfg.M_steps * opts.flow_refine;

  // mu^(0): the constant flow delta_{x0}.
  MeasureFlow flow;
  {
    const double T = cs.space().config().constants.T;
    const Eigen::MatrixXd atoms = x0.replicate(1, opts.n_cloud);
    for (int m = 0; m <= fine.M_steps; ++m) {
      flow.times.push_back(m == fine.M_steps ? T : T * m / fine.M_steps);
      flow.clouds.push_back(EmpiricalFieldMeasure::uniform(atoms));
    }
    flow.means = x0.replicate(1, fine.M_steps + 1);
  }

  PicardResult res;
  Ensemble current;
  for (int it = 0; it < opts.max_iter; ++it) {
    current = simulate_frozen(cs, control, fine, x0, flow);
    MeasureFlow next = MeasureFlow::from_ensemble(current);
    res.residuals.push_back(flow_residual(cs.space(), flow, next));
    flow = std::move(next);
    if (res.residuals.back() < opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.flow = std::move(flow);
  res.ensemble = downsample(current, opts.flow_refine);
  return res;
}

}  // namespace mvlab
