#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "mvlab/errors.hpp"

namespace mvlab {

template <typename Scalar>
struct TransportArc {
  int source = 0;
  int sink = 0;
  Scalar flow{};
};

template <typename Scalar>
struct TransportResult {
  Scalar cost{};
  std::vector<TransportArc<Scalar>> plan;  ///< basic arcs with positive flow
  std::size_t pivots = 0;
};

namespace detail {

/// Primal network simplex on the bipartite transportation graph. The basis
/// is a spanning tree of n + m - 1 arcs over source nodes 0..n-1 and sink
/// nodes n..n+m-1; node potentials satisfy u_i + v_j = C_ij on tree arcs.
template <typename Scalar>
class TransportSimplex {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  TransportSimplex(const Vector& a, const Vector& b, const Matrix& cost)
      : n_(static_cast<int>(a.size())), m_(static_cast<int>(b.size())), cost_(cost) {
    const int nodes = n_ + m_;
    adjacency_.assign(nodes, {});
    potential_.assign(nodes, Scalar(0));
    parent_arc_.assign(nodes, -1);
    depth_.assign(nodes, 0);
    northwest_corner(a, b);
    Scalar cmax = cost_.size() > 0 ? cost_.cwiseAbs().maxCoeff() : Scalar(0);
    tolerance_ = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + cmax);
  }

  TransportResult<Scalar> solve() {
    const std::size_t cells = static_cast<std::size_t>(n_) * m_;
    const std::size_t block = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(double(cells))));
    const std::size_t max_pivots = 100 * cells + 1000;
    std::size_t cursor = 0;
    std::size_t pivots = 0;
    rebuild_tree();
    while (true) {
      int in_i = -1, in_j = -1;
      if (!find_entering(block, cursor, in_i, in_j)) break;
      pivot(in_i, in_j);
      rebuild_tree();
      if (++pivots > max_pivots) throw UsageError("transport simplex failed to converge (cycling)");
    }
    TransportResult<Scalar> out;
    out.pivots = pivots;
    for (const auto& arc : arcs_) {
      out.cost += arc.flow * cost_(arc.source, arc.sink);
      if (arc.flow > Scalar(0)) out.plan.push_back(arc);
    }
    return out;
  }

 private:
  void northwest_corner(const Vector& a, const Vector& b) {
    Vector supply = a;
    Vector demand = b;
    int i = 0, j = 0;
    arcs_.reserve(n_ + m_ - 1);
    while (true) {
      const bool last_row = i == n_ - 1;
      const bool last_col = j == m_ - 1;
      if (last_row && last_col) {
        // Absorb rounding in the final cell.
        add_arc(i, j, std::max(Scalar(0), std::min(supply[i], demand[j])));
        break;
      }
      if ((supply[i] <= demand[j] && !last_row) || last_col) {
        const Scalar x = std::max(Scalar(0), std::min(supply[i], demand[j]));
        add_arc(i, j, x);
        demand[j] -= x;
        supply[i] -= x;
        ++i;
      } else {
        const Scalar x = std::max(Scalar(0), std::min(supply[i], demand[j]));
        add_arc(i, j, x);
        supply[i] -= x;
        demand[j] -= x;
        ++j;
      }
    }
  }

  void add_arc(int i, int j, Scalar flow) {
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({i, j, flow});
    adjacency_[i].push_back(id);
    adjacency_[n_ + j].push_back(id);
  }

  int other_end(int arc, int node) const {
    const auto& a = arcs_[arc];
    return node < n_ ? n_ + a.sink : a.source;
  }

  /// Potentials, parents and depths by a traversal from node 0.
  void rebuild_tree() {
    stack_.clear();
    stack_.push_back(0);
    parent_arc_[0] = -1;
    depth_[0] = 0;
    potential_[0] = Scalar(0);
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      for (int arc : adjacency_[node]) {
        if (arc == parent_arc_[node]) continue;
        const int next = other_end(arc, node);
        parent_arc_[next] = arc;
        depth_[next] = depth_[node] + 1;
        const Scalar c = cost_(arcs_[arc].source, arcs_[arc].sink);
        potential_[next] = c - potential_[node];
        stack_.push_back(next);
      }
    }
  }

  /// Block search pricing: the most negative reduced cost within the first
  /// block (cyclically from the cursor) that contains a negative one.
  bool find_entering(std::size_t block, std::size_t& cursor, int& in_i, int& in_j) const {
    const std::size_t cells = static_cast<std::size_t>(n_) * m_;
    Scalar best = -tolerance_;
    std::size_t scanned = 0;
    std::size_t pos = cursor;
    bool found = false;
    while (scanned < cells) {
      const std::size_t end = std::min(cells, scanned + block);
      for (; scanned < end; ++scanned) {
        const int j = static_cast<int>(pos / n_);
        const int i = static_cast<int>(pos % n_);
        const Scalar reduced = cost_(i, j) - potential_[i] - potential_[n_ + j];
        if (reduced < best) {
          best = reduced;
          in_i = i;
          in_j = j;
          found = true;
        }
        if (++pos == cells) pos = 0;
      }
      if (found) {
        cursor = pos;
        return true;
      }
    }
    return false;
  }

  void pivot(int in_i, int in_j) {
    // Tree path between sink node of in_j and source in_i.
    int a = n_ + in_j;
    int b = in_i;
    path_a_.clear();
    path_b_.clear();
    while (depth_[a] > depth_[b]) {
      path_a_.push_back(parent_arc_[a]);
      a = other_end(parent_arc_[a], a);
    }
    while (depth_[b] > depth_[a]) {
      path_b_.push_back(parent_arc_[b]);
      b = other_end(parent_arc_[b], b);
    }
    while (a != b) {
      path_a_.push_back(parent_arc_[a]);
      a = other_end(parent_arc_[a], a);
      path_b_.push_back(parent_arc_[b]);
      b = other_end(parent_arc_[b], b);
    }
    cycle_.assign(path_a_.begin(), path_a_.end());
    cycle_.insert(cycle_.end(), path_b_.rbegin(), path_b_.rend());
    // Walking sink(in_j) -> source(in_i), arcs alternate -, +, -, ...
    int leaving = -1;
    Scalar theta = std::numeric_limits<Scalar>::infinity();
    for (std::size_t k = 0; k < cycle_.size(); k += 2) {
      const Scalar f = arcs_[cycle_[k]].flow;
      if (f < theta) {
        theta = f;
        leaving = static_cast<int>(k);
      }
    }
    for (std::size_t k = 0; k < cycle_.size(); ++k) {
      auto& f = arcs_[cycle_[k]].flow;
      if (k % 2 == 0) {
        f = std::max(Scalar(0), f - theta);
      } else {
        f += theta;
      }
    }
    const int out_arc = cycle_[leaving];
    detach(out_arc);
    arcs_[out_arc] = {in_i, in_j, theta};
    adjacency_[in_i].push_back(out_arc);
    adjacency_[n_ + in_j].push_back(out_arc);
  }

  void detach(int arc) {
    auto drop = [arc](std::vector<int>& list) {
      auto it = std::find(list.begin(), list.end(), arc);
      *it = list.back();
      list.pop_back();
    };
    drop(adjacency_[arcs_[arc].source]);
    drop(adjacency_[n_ + arcs_[arc].sink]);
  }

  int n_, m_;
  const Matrix& cost_;
  Scalar tolerance_{};
  std::vector<TransportArc<Scalar>> arcs_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<Scalar> potential_;
  std::vector<int> parent_arc_;
  std::vector<int> depth_;
  std::vector<int> stack_, path_a_, path_b_, cycle_;
};

}  // namespace detail

/// Exact minimum-cost transport between weights a (sources) and b (sinks)
/// under cost(i, j). Weights must be nonnegative with equal totals.
template <typename Scalar>
TransportResult<Scalar> solve_transport(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& a,
                                        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                                        const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cost) {
  if (a.size() == 0 || b.size() == 0) throw UsageError("transport: empty marginal");
  if (cost.rows() != a.size() || cost.cols() != b.size()) throw UsageError("transport: cost shape mismatch");
  if ((a.array() < Scalar(0)).any() || (b.array() < Scalar(0)).any())
    throw UsageError("transport: negative weight");
  const Scalar sa = a.sum(), sb = b.sum();
  if (std::abs(sa - sb) > Scalar(1e-9) * std::max(Scalar(1), std::abs(sa)))
    throw UsageError("transport: marginals have different mass");
  detail::TransportSimplex<Scalar> simplex(a, b, cost);
  return simplex.solve();
}

}  // namespace mvlab
