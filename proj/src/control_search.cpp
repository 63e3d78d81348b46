#include "mvlab/control_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mvlab {

namespace {

double sample_se(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0) / n);
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

void finish_row(ValueRow& row) {
  row.argmax = 0;
  for (std::size_t i = 1; i < row.cells.size(); ++i)
    if (row.cells[i].mean > row.cells[row.argmax].mean) row.argmax = static_cast<int>(i);
  row.value = row.cells[row.argmax].mean;
  for (const auto& c : row.cells)
    if (c.mean > row.value) throw AssertionFailure("value: V^n below a member value");
}

Ensemble simulate_with_context(const CoefficientSet& cs, const NamedControl& c, const SimConfig& cfg,
                               const Eigen::VectorXd& x0, const char* where) {
  try {
    return simulate_particles(cs, c, cfg, x0);
  } catch (const BlowUpError& e) {
    std::ostringstream os;
    os << where << ": control " << c.name << ", n = " << cfg.n_particles << ", replicate " << cfg.replicate << ": "
       << e.what();
    throw BlowUpError(os.str(), e.step(), e.time());
  }
}

PicardResult picard_with_context(const CoefficientSet& cs, const NamedControl& c, const SimConfig& cfg,
                                 const Eigen::VectorXd& x0, const PicardOptions& opts, const char* where) {
  try {
    return picard_mckean(cs, c, cfg, x0, opts);
  } catch (const BlowUpError& e) {
    std::ostringstream os;
    os << where << ": control " << c.name << ", mean-field reference: " << e.what();
    throw BlowUpError(os.str(), e.step(), e.time());
  }
}

nlohmann::json row_json(const ValueReport& r, const ValueRow& row) {
  nlohmann::json j;
  j["n"] = row.n;
  j["argmax"] = r.controls[row.argmax];
  j["value"] = row.value;
  for (std::size_t i = 0; i < row.cells.size(); ++i)
    j["cells"].push_back({{"control", r.controls[i]},
                          {"mean", row.cells[i].mean},
                          {"se", row.cells[i].se},
                          {"replicates", row.cells[i].replicates}});
  return j;
}

}  // namespace

double ensemble_moment(const SpectralSpace& space, const Ensemble& e, double alpha) {
  double acc = 0.0;
  for (const auto& p : e.paths) {
    double sup = 0.0;
    for (Eigen::Index m = 0; m < p.path.states.cols(); ++m)
      sup = std::max(sup, space.norm(p.path.states.col(m), Space::H));
    acc += std::pow(sup, alpha);
  }
  return acc / static_cast<double>(e.size());
}

double TestFunctional::operator()(const SpectralSpace& space, const Ensemble& e) const {
  const double v = eval(space, e);
  const double bound = growth_constant * (1.0 + ensemble_moment(space, e, growth_alpha));
  if (!std::isfinite(v) || std::abs(v) > bound * (1.0 + 1e-12))
    throw AssertionFailure("test functional " + name + " violates its declared growth bound");
  return v;
}

TestFunctional zero_functional() {
  TestFunctional f;
  f.name = "zero";
  f.eval = [](const SpectralSpace&, const Ensemble&) { return 0.0; };
  f.per_particle = [](const SpectralSpace&, const Ensemble& e) {
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(e.size())).eval();
  };
  return f;
}

TestFunctional terminal_moment(double clip) {
  if (!(clip > 0)) throw ConfigError("terminal_moment: clip must be > 0");
  TestFunctional f;
  f.name = "terminal_moment";
  f.growth_constant = 1.0;
  f.growth_alpha = 2.0;
  f.per_particle = [clip](const SpectralSpace& space, const Ensemble& e) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(e.size()));
    for (std::size_t k = 0; k < e.size(); ++k) {
      const auto& s = e.paths[k].path.states;
      v[static_cast<Eigen::Index>(k)] = std::min(std::pow(space.norm(s.col(s.cols() - 1), Space::H), 2), clip * clip);
    }
    return v;
  };
  f.eval = [pp = f.per_particle](const SpectralSpace& space, const Ensemble& e) { return pp(space, e).mean(); };
  return f;
}

TestFunctional running_cost(const SpectralSpace& space, const Eigen::VectorXd& phi, const Eigen::VectorXd& cost,
                            double kappa) {
  if (phi.size() != space.size()) throw ConfigError("running_cost: phi has the wrong length");
  TestFunctional f;
  f.name = "running_cost";
  const double T = space.config().constants.T;
  f.growth_alpha = 1.0;
  f.growth_constant = T * space.norm(phi, Space::H) + std::abs(kappa) * T * cost.cwiseAbs().maxCoeff();
  f.per_particle = [phi, cost, kappa](const SpectralSpace& sp, const Ensemble& e) {
    if (cost.size() != e.paths.front().control.actions())
      throw UsageError("running_cost: cost vector does not match the action count");
    Eigen::VectorXd v(static_cast<Eigen::Index>(e.size()));
    for (std::size_t k = 0; k < e.size(); ++k) {
      const auto& p = e.paths[k];
      double acc = 0.0;
      for (Eigen::Index m = 0; m + 1 < p.path.states.cols(); ++m) {
        const double dt = p.path.times[m + 1] - p.path.times[m];
        acc += dt * sp.inner_H(p.path.states.col(m), phi);
        acc += kappa * dt * p.control.cell_probs.row(m).dot(cost);
      }
      v[static_cast<Eigen::Index>(k)] = acc;
    }
    return v;
  };
  f.eval = [pp = f.per_particle](const SpectralSpace& sp, const Ensemble& e) { return pp(sp, e).mean(); };
  return f;
}

const ValueRow& ValueReport::row(int n) const {
  if (n == 0) return limit;
  for (const auto& r : rows)
    if (r.n == n) return r;
  if (proxy.n == n && !proxy.cells.empty()) return proxy;
  throw UsageError("value report has no row for n = " + std::to_string(n));
}

double ValueReport::gap(int n) const { return std::abs(row(n).value - limit.value); }

double ValueReport::gap_se(int n) const {
  const auto& r = row(n);
  return std::hypot(r.cells[r.argmax].se, limit.cells[limit.argmax].se);
}

nlohmann::json ValueReport::to_json() const {
  nlohmann::json j;
  j["psi"] = psi;
  j["seed"] = seed;
  j["controls"] = controls;
  for (const auto& r : rows) {
    auto rj = row_json(*this, r);
    rj["gap"] = gap(r.n);
    rj["gap_se"] = gap_se(r.n);
    j["rows"].push_back(rj);
  }
  j["limit"] = row_json(*this, limit);
  if (!proxy.cells.empty()) j["proxy"] = row_json(*this, proxy);
  return j;
}

std::string ValueReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "n,control,mean,se,replicates,is_argmax\n";
  auto emit = [&](const ValueRow& r) {
    for (std::size_t i = 0; i < r.cells.size(); ++i)
      os << r.n << ',' << controls[i] << ',' << r.cells[i].mean << ',' << r.cells[i].se << ','
         << r.cells[i].replicates << ',' << (static_cast<int>(i) == r.argmax) << '\n';
  };
  for (const auto& r : rows) emit(r);
  if (!proxy.cells.empty()) emit(proxy);
  emit(limit);
  return os.str();
}

ValueReport value_function(const CoefficientSet& cs, const ControlFamily& family, const SimConfig& cfg,
                           const Eigen::VectorXd& x0, const TestFunctional& psi, const ValueOptions& opts) {
  family.validate(cs.actions().size(), cfg.M_steps);
  if (opts.replicates < 8) throw ConfigError("value_function: replicates must be >= 8");
  if (opts.n_list.empty()) throw ConfigError("value_function: n_list is empty");
  const auto& space = cs.space();

  ValueReport report;
  report.psi = psi.name;
  report.seed = cfg.rng_seed;
  for (const auto& c : family.members) report.controls.push_back(c.name);

  auto run_row = [&](int n) {
    ValueRow row;
    row.n = n;
    for (const auto& c : family.members) {
      std::vector<double> values;
      for (int r = 0; r < opts.replicates; ++r) {
        SimConfig rc = cfg;
        rc.n_particles = n;
        rc.experiment = lane_id("value");
        rc.replicate = static_cast<std::uint64_t>(r);
        values.push_back(psi(space, simulate_with_context(cs, c, rc, x0, "value")));
      }
      row.cells.push_back({mean_of(values), sample_se(values), opts.replicates});
    }
    finish_row(row);
    return row;
  };

  for (int n : opts.n_list) report.rows.push_back(run_row(n));
  if (opts.proxy) report.proxy = run_row(4 * *std::max_element(opts.n_list.begin(), opts.n_list.end()));

  report.limit.n = 0;
  for (const auto& c : family.members) {
    SimConfig rc = cfg;
    rc.experiment = lane_id("value_reference");
    const auto pr = picard_with_context(cs, c, rc, x0, opts.picard, "value");
    ValueCell cell;
    cell.mean = psi(space, pr.ensemble);
    cell.replicates = 1;
    if (psi.per_particle) {
      const Eigen::VectorXd v = psi.per_particle(space, pr.ensemble);
      const double n = static_cast<double>(v.size());
      cell.se = std::sqrt((v.array() - v.mean()).square().sum() / (n - 1.0) / n);
    }
    report.limit.cells.push_back(cell);
  }
  finish_row(report.limit);
  return report;
}

std::vector<std::string> epsilon_optimal(const ValueReport& report, int n, double epsilon) {
  const ValueRow& row = report.row(n);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < row.cells.size(); ++i)
    if (row.cells[i].mean >= row.value - epsilon) out.push_back(report.controls[i]);
  return out;
}

bool ChaosTable::decreasing_within_se() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].mean > rows[i - 1].mean + std::hypot(rows[i].se, rows[i - 1].se)) return false;
  return true;
}

double ChaosTable::last_over_first() const { return rows.back().mean / rows.front().mean; }

nlohmann::json ChaosTable::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["baseline"] = baseline;
  j["fitted_rate"] = fitted_rate;
  j["decreasing_within_se"] = decreasing_within_se();
  j["last_over_first"] = last_over_first();
  for (const auto& r : rows)
    j["rows"].push_back({{"n", r.n}, {"mean", r.mean}, {"se", r.se}, {"replicates", r.replicates},
                         {"slice_w2", r.slice_w2}});
  return j;
}

std::string ChaosTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "n,mean,se";
  const std::size_t T = rows.empty() ? 0 : rows.front().slice_w2.size();
  for (std::size_t m = 0; m < T; ++m) os << ",w2_t" << m;
  os << '\n';
  for (const auto& r : rows) {
    os << r.n << ',' << r.mean << ',' << r.se;
    for (double v : r.slice_w2) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

ChaosTable chaos_experiment(const CoefficientSet& cs, const NamedControl& control, const SimConfig& cfg,
                            const Eigen::VectorXd& x0, const Ensemble& reference, const Ensemble* independent,
                            const ChaosOptions& opts) {
  if (opts.n_list.empty() || opts.replicates < 1) throw ConfigError("chaos: need a nonempty n_list and replicates >= 1");
  const auto& space = cs.space();
  const PathMetric metric{space, cs.actions(), space.config().constants.alpha, opts.rho};
  ChaosTable table;
  table.seed = cfg.rng_seed;
  for (int n : opts.n_list) {
    if (static_cast<std::size_t>(n) >= reference.size())
      throw ConfigError("chaos: the reference must be larger than every n");
    ChaosRow row;
    row.n = n;
    row.slice_w2.assign(reference.steps() + 1, 0.0);
    for (int r = 0; r < opts.replicates; ++r) {
      SimConfig rc = cfg;
      rc.n_particles = n;
      rc.experiment = lane_id("chaos");
      rc.replicate = static_cast<std::uint64_t>(r);
      const Ensemble e = simulate_with_context(cs, control, rc, x0, "chaos");
      row.replicates.push_back(wasserstein_paths(metric, e, reference));
      for (Eigen::Index m = 0; m <= reference.steps(); ++m)
        row.slice_w2[m] += wasserstein_fields(space, empirical_state_measure(e, m),
                                              empirical_state_measure(reference, m), 2.0, Space::X) /
                           opts.replicates;
    }
    row.mean = mean_of(row.replicates);
    row.se = sample_se(row.replicates);
    table.rows.push_back(std::move(row));
  }
  if (independent) table.baseline = wasserstein_paths(metric, reference, *independent);

  if (table.rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(table.rows.size());
    for (const auto& r : table.rows) {
      const double x = std::log(static_cast<double>(r.n)), y = std::log(r.mean);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    table.fitted_rate = -(k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  return table;
}

bool HausdorffTable::decreasing(double slack) const {
  for (const auto& d : distances)
    for (std::size_t i = 1; i < d.size(); ++i)
      if (d[i] > d[i - 1] + slack) return false;
  return true;
}

bool HausdorffTable::continuity_monotone() const {
  std::vector<std::size_t> order(probe_norms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probe_norms[a] < probe_norms[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (probe_distances[order[i]] < probe_distances[order[i - 1]]) return false;
  return true;
}

nlohmann::json HausdorffTable::to_json() const {
  nlohmann::json j;
  j["n_list"] = n_list;
  j["distances"] = distances;
  j["probe_norms"] = probe_norms;
  j["probe_distances"] = probe_distances;
  j["continuity_monotone"] = continuity_monotone();
  return j;
}

std::string HausdorffTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "kind,index,n,x_distance,hausdorff\n";
  for (std::size_t x = 0; x < distances.size(); ++x)
    for (std::size_t i = 0; i < n_list.size(); ++i)
      os << "convergence," << x << ',' << n_list[i] << ",," << distances[x][i] << '\n';
  for (std::size_t p = 0; p < probe_norms.size(); ++p)
    os << "continuity," << p << ",0," << probe_norms[p] << ',' << probe_distances[p] << '\n';
  return os.str();
}

HausdorffTable hausdorff_experiment(const CoefficientSet& cs, const ControlFamily& family, const SimConfig& cfg,
                                    const std::vector<Eigen::VectorXd>& x_list,
                                    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probes,
                                    const HausdorffOptions& opts) {
  family.validate(cs.actions().size(), cfg.M_steps);
  if (x_list.empty() || opts.n_list.empty() || opts.replicates < 1)
    throw ConfigError("hausdorff: need initial states, an n_list and replicates >= 1");
  const auto& space = cs.space();
  const PathMetric metric{space, cs.actions(), space.config().constants.alpha, opts.rho};

  // Picard references per initial state, computed once.
  std::vector<std::pair<Eigen::VectorXd, std::vector<Ensemble>>> cache;
  cache.reserve(x_list.size() + 2 * probes.size());
  auto reference_set = [&](const Eigen::VectorXd& x) {
    auto it = std::find_if(cache.begin(), cache.end(), [&](const auto& c) { return c.first == x; });
    if (it == cache.end()) {
      std::vector<Ensemble> storage;
      for (const auto& c : family.members) {
        SimConfig rc = cfg;
        rc.experiment = lane_id("hausdorff_reference");
        storage.push_back(picard_with_context(cs, c, rc, x, opts.picard, "hausdorff").ensemble);
      }
      cache.emplace_back(x, std::move(storage));
      it = cache.end() - 1;
    }
    LawSet set;
    for (std::size_t i = 0; i < family.members.size(); ++i) {
      set.tags.push_back(family.members[i].name + "@ref");
      set.members.push_back(OuterLaw::dirac(it->second[i]));
    }
    return set;
  };

  HausdorffTable table;
  table.n_list = opts.n_list;
  for (const auto& x : x_list) {
    const LawSet ref = reference_set(x);
    std::vector<double> row;
    for (int n : opts.n_list) {
      std::vector<std::vector<Ensemble>> store(family.members.size());
      LawSet set;
      for (std::size_t i = 0; i < family.members.size(); ++i) {
        for (int r = 0; r < opts.replicates; ++r) {
          SimConfig rc = cfg;
          rc.n_particles = n;
          rc.experiment = lane_id("hausdorff");
          rc.replicate = static_cast<std::uint64_t>(r);
          store[i].push_back(simulate_with_context(cs, family.members[i], rc, x, "hausdorff"));
        }
      }
      for (std::size_t i = 0; i < family.members.size(); ++i) {
        std::vector<const Ensemble*> parts;
        for (const auto& e : store[i]) parts.push_back(&e);
        set.tags.push_back(family.members[i].name + "@" + std::to_string(n));
        set.members.push_back(OuterLaw::uniform(parts));
      }
      row.push_back(hausdorff(metric, set, ref));
    }
    table.distances.push_back(std::move(row));
  }

  for (const auto& [a, b] : probes) {
    const LawSet A = reference_set(a);
    const LawSet B = reference_set(b);
    table.probe_norms.push_back(space.norm((a - b).eval(), Space::H));
    table.probe_distances.push_back(hausdorff(metric, A, B));
  }
  return table;
}

}  // namespace mvlab
