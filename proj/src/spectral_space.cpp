#include "mvlab/spectral_space.hpp"

namespace mvlab {

const char* to_string(Space s) {
  switch (s) {
    case Space::H:
      return "H";
    case Space::V:
      return "V";
    case Space::X:
      return "X";
    case Space::Y:
      return "Y";
  }
  return "?";
}

void PathSample::validate(double T) const {
  if (times.empty()) throw UsageError("path has no time points");
  if (static_cast<Eigen::Index>(times.size()) != states.cols())
    throw UsageError("path times and states disagree in length");
  if (times.front() != 0.0) throw UsageError("path must start at t = 0");
  for (std::size_t m = 1; m < times.size(); ++m)
    if (!(times[m] > times[m - 1])) throw UsageError("path times must be strictly increasing");
  if (std::abs(times.back() - T) > 1e-12 * std::max(1.0, T)) throw UsageError("path must end at t = T");
}

bool same_grid(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(a[i]))) return false;
  return true;
}

double trapezoid(const std::vector<double>& times, const Eigen::Ref<const Eigen::VectorXd>& values) {
  double acc = 0.0;
  for (std::size_t m = 1; m < times.size(); ++m)
    acc += 0.5 * (times[m] - times[m - 1]) * (values[m] + values[m - 1]);
  return acc;
}

double path_metric(const SpectralSpace& space, const PathSample& a, const PathSample& b, double alpha) {
  if (!same_grid(a.times, b.times)) throw UsageError("path_metric: time grids differ");
  if (a.states.rows() != b.states.rows()) throw UsageError("path_metric: field dimensions differ");
  const Eigen::MatrixXd diff = a.states - b.states;
  const Eigen::MatrixXd coeffs = space.to_sine(diff);
  const Eigen::VectorXd wv = space.weights(Space::V);
  double sup_v = 0.0;
  Eigen::VectorXd y_pow(diff.cols());
  for (Eigen::Index m = 0; m < diff.cols(); ++m) {
    sup_v = std::max(sup_v, std::sqrt((wv.array() * coeffs.col(m).array().square()).sum()));
    y_pow[m] = std::pow(space.norm(diff.col(m), Space::Y), alpha);
  }
  return sup_v + std::pow(trapezoid(a.times, y_pow), 1.0 / alpha);
}

}  // namespace mvlab
