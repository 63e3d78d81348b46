#include "mvlab/controls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mvlab/transport.hpp"

namespace mvlab {

namespace {

void check_probability(const Eigen::VectorXd& p, const char* what) {
  if ((p.array() < 0).any()) throw ConfigError(std::string(what) + ": negative probability");
  if (std::abs(p.sum() - 1.0) > 1e-12) throw ConfigError(std::string(what) + ": probabilities must sum to 1");
}

}  // namespace

void RelaxedControlPath::validate() const {
  if (static_cast<Eigen::Index>(times.size()) != cells() + 1)
    throw UsageError("relaxed control: need one more time boundary than cells");
  for (std::size_t m = 1; m < times.size(); ++m)
    if (!(times[m] > times[m - 1])) throw UsageError("relaxed control: times must increase");
  for (Eigen::Index m = 0; m < cells(); ++m) {
    const auto row = cell_probs.row(m);
    if ((row.array() < 0).any() || std::abs(row.sum() - 1.0) > 1e-12)
      throw UsageError("relaxed control: row is not a probability vector");
  }
}

RelaxedControlPath RelaxedControlPath::constant(const std::vector<double>& times, const Eigen::VectorXd& probs) {
  RelaxedControlPath rc;
  rc.times = times;
  rc.cell_probs = probs.transpose().replicate(static_cast<Eigen::Index>(times.size()) - 1, 1);
  return rc;
}

double action_w1(const ActionSpace& actions, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const int K = actions.size();
  if (p.size() != K || q.size() != K) throw UsageError("action_w1: probability vector size mismatch");
  if (p == q) return 0.0;
  if (actions.coords.rows() == 1) {
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return actions.coordinate(a) < actions.coordinate(b); });
    double cdf = 0.0, acc = 0.0;
    for (int r = 0; r + 1 < K; ++r) {
      cdf += p[order[r]] - q[order[r]];
      acc += std::abs(cdf) * (actions.coordinate(order[r + 1]) - actions.coordinate(order[r]));
    }
    return acc;
  }
  Eigen::MatrixXd cost(K, K);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) cost(a, b) = actions.distance(a, b);
  return solve_transport<double>(p, q, cost).cost;
}

double vague_distance(const ActionSpace& actions, const RelaxedControlPath& a, const RelaxedControlPath& b) {
  if (!same_grid(a.times, b.times)) throw UsageError("vague_distance: time grids differ");
  if (a.actions() != b.actions() || a.actions() != actions.size())
    throw UsageError("vague_distance: action spaces differ");
  double acc = 0.0;
  for (Eigen::Index m = 0; m < a.cells(); ++m) {
    const Eigen::VectorXd pa = a.cell_probs.row(m).transpose();
    const Eigen::VectorXd pb = b.cell_probs.row(m).transpose();
    acc += (a.times[m + 1] - a.times[m]) * action_w1(actions, pa, pb);
  }
  return acc;
}

Eigen::VectorXd sample_action_kernel(const RelaxedControlPath& rc, Eigen::Index cell) {
  if (cell < 0 || cell >= rc.cells()) throw UsageError("sample_action_kernel: cell index out of range");
  return rc.cell_probs.row(cell).transpose();
}

Eigen::VectorXd NamedControl::evaluate(Eigen::Index cell, const Eigen::VectorXd& y, const SpectralSpace& space,
                                       int K) const {
  struct Visitor {
    Eigen::Index cell;
    const Eigen::VectorXd& y;
    const SpectralSpace& space;
    int K;
    Eigen::VectorXd operator()(const DiracControl& c) const {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
      p[c.action] = 1.0;
      return p;
    }
    Eigen::VectorXd operator()(const MixtureControl& c) const { return c.probs; }
    Eigen::VectorXd operator()(const FixedPathControl& c) const { return sample_action_kernel(c.path, cell); }
    Eigen::VectorXd operator()(const FeedbackSignControl& c) const {
      Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
      const double spatial_mean = space.h() * y.sum() / space.length();
      p[spatial_mean > 0 ? c.positive_action : c.negative_action] = 1.0;
      return p;
    }
  };
  return std::visit(Visitor{cell, y, space, K}, rule);
}

void NamedControl::validate(int K, Eigen::Index cells) const {
  auto check_action = [&](int a) {
    if (a < 0 || a >= K) throw ConfigError("control '" + name + "': action index out of range");
  };
  if (const auto* d = std::get_if<DiracControl>(&rule)) check_action(d->action);
  if (const auto* m = std::get_if<MixtureControl>(&rule)) {
    if (m->probs.size() != K) throw ConfigError("control '" + name + "': mixture has wrong length");
    check_probability(m->probs, ("control '" + name + "'").c_str());
  }
  if (const auto* f = std::get_if<FixedPathControl>(&rule)) {
    if (f->path.actions() != K || f->path.cells() != cells)
      throw ConfigError("control '" + name + "': fixed path shape does not match the simulation grid");
    f->path.validate();
  }
  if (const auto* s = std::get_if<FeedbackSignControl>(&rule)) {
    check_action(s->positive_action);
    check_action(s->negative_action);
  }
}

const NamedControl& ControlFamily::find(const std::string& name) const {
  for (const auto& m : members)
    if (m.name == name) return m;
  throw ConfigError("unknown control '" + name + "'");
}

void ControlFamily::validate(int K, Eigen::Index cells) const {
  if (members.empty()) throw ConfigError("control family is empty");
  for (const auto& m : members) m.validate(K, cells);
}

std::string control_path_to_csv(const RelaxedControlPath& rc) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index k = 0; k < rc.actions(); ++k) os << (k ? "," : "") << "p" << k;
  os << "\n";
  for (Eigen::Index m = 0; m < rc.cells(); ++m) {
    for (Eigen::Index k = 0; k < rc.actions(); ++k) os << (k ? "," : "") << rc.cell_probs(m, k);
    os << "\n";
  }
  return os.str();
}

RelaxedControlPath control_path_from_csv(const std::string& text, const std::vector<double>& times) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("control csv: missing header");
  const auto K = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(row.size()) != K) throw UsageError("control csv: ragged row");
    rows.push_back(std::move(row));
  }
  RelaxedControlPath rc;
  rc.times = times;
  rc.cell_probs.resize(static_cast<Eigen::Index>(rows.size()), K);
  for (std::size_t m = 0; m < rows.size(); ++m)
    for (Eigen::Index k = 0; k < K; ++k) rc.cell_probs(static_cast<Eigen::Index>(m), k) = rows[m][k];
  rc.validate();
  return rc;
}

}  // namespace mvlab
