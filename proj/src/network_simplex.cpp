#include "network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdlab/errors.hpp"

namespace cdlab::detail {

NetworkSimplex::NetworkSimplex(std::span<const double> supply, std::span<const double> demand,
                               double max_cost)
    : n_sources_(static_cast<int>(supply.size())),
      n_sinks_(static_cast<int>(demand.size())),
      root_(n_sources_ + n_sinks_) {
  const int node_count = root_ + 1;
  art_cost_ = (max_cost + 1.0) * node_count;
  eps_ = 1e-14 * art_cost_;

  parent_.assign(node_count, -1);
  pred_.assign(node_count, 0);
  first_child_.assign(node_count, -1);
  next_sibling_.assign(node_count, -1);
  prev_sibling_.assign(node_count, -1);
  depth_.assign(node_count, 0);
  pot_.assign(node_count, 0.0);

  // Artificial basis: sources drain into the root for free, sinks are fed
  // from the root at a prohibitive price.
  for (int v = 0; v < root_; ++v) {
    const bool is_source = v < n_sources_;
    tail_.push_back(is_source ? v : root_);
    head_.push_back(is_source ? root_ : v);
    cost_.push_back(is_source ? 0.0 : art_cost_);
    flow_.push_back(is_source ? supply[v] : demand[v - n_sources_]);
    pred_[v] = static_cast<std::size_t>(v);
    depth_[v] = 1;
    pot_[v] = is_source ? 0.0 : art_cost_;
    attach(v, root_);
  }
  first_real_ = tail_.size();
}

void NetworkSimplex::add_arc(int source, int sink, double cost) {
  tail_.push_back(source);
  head_.push_back(n_sources_ + sink);
  cost_.push_back(cost);
  flow_.push_back(0.0);
}

double NetworkSimplex::artificial_flow() const {
  double worst = 0.0;
  for (std::size_t a = 0; a < first_real_; ++a) worst = std::max(worst, std::abs(flow_[a]));
  return worst;
}

void NetworkSimplex::detach(int node) {
  const int p = parent_[node];
  if (p < 0) return;
  if (prev_sibling_[node] >= 0) {
    next_sibling_[prev_sibling_[node]] = next_sibling_[node];
  } else {
    first_child_[p] = next_sibling_[node];
  }
  if (next_sibling_[node] >= 0) prev_sibling_[next_sibling_[node]] = prev_sibling_[node];
  parent_[node] = -1;
  next_sibling_[node] = prev_sibling_[node] = -1;
}

void NetworkSimplex::attach(int node, int parent) {
  parent_[node] = parent;
  prev_sibling_[node] = -1;
  next_sibling_[node] = first_child_[parent];
  if (first_child_[parent] >= 0) prev_sibling_[first_child_[parent]] = node;
  first_child_[parent] = node;
}

void NetworkSimplex::refresh_subtree(int top) {
  stack_.clear();
  stack_.push_back(top);
  while (!stack_.empty()) {
    const int v = stack_.back();
    stack_.pop_back();
    const int p = parent_[v];
    const std::size_t a = pred_[v];
    depth_[v] = depth_[p] + 1;
    // Tree arcs have zero reduced cost.
    pot_[v] = tail_[a] == v ? pot_[p] - cost_[a] : pot_[p] + cost_[a];
    for (int c = first_child_[v]; c >= 0; c = next_sibling_[c]) stack_.push_back(c);
  }
}

bool NetworkSimplex::pivot(std::size_t entering) {
  const int first = tail_[entering];
  const int second = head_[entering];

  int a = first;
  int b = second;
  while (a != b) {
    if (depth_[a] >= depth_[b]) {
      a = parent_[a];
    } else {
      b = parent_[b];
    }
  }
  const int join = a;

  // Leaving arc: last blocking arc along the cycle oriented from the join
  // through the entering arc.
  double delta = std::numeric_limits<double>::infinity();
  int leaving_node = -1;
  bool leaving_on_first = false;
  for (int w = first; w != join; w = parent_[w]) {
    const std::size_t arc = pred_[w];
    if (tail_[arc] == w && flow_[arc] < delta) {
      delta = flow_[arc];
      leaving_node = w;
      leaving_on_first = true;
    }
  }
  for (int w = second; w != join; w = parent_[w]) {
    const std::size_t arc = pred_[w];
    if (tail_[arc] != w && flow_[arc] <= delta) {
      delta = flow_[arc];
      leaving_node = w;
      leaving_on_first = false;
    }
  }
  if (leaving_node < 0) return false;

  if (delta > 0.0) {
    flow_[entering] += delta;
    for (int w = first; w != join; w = parent_[w]) {
      const std::size_t arc = pred_[w];
      flow_[arc] += tail_[arc] == w ? -delta : delta;
    }
    for (int w = second; w != join; w = parent_[w]) {
      const std::size_t arc = pred_[w];
      flow_[arc] += tail_[arc] == w ? delta : -delta;
    }
    flow_[pred_[leaving_node]] = 0.0;
  }

  // Re-hang the subtree cut off by the leaving arc below the entering arc.
  const int u_in = leaving_on_first ? first : second;
  const int v_in = leaving_on_first ? second : first;
  std::vector<int> path;
  for (int w = u_in;; w = parent_[w]) {
    path.push_back(w);
    if (w == leaving_node) break;
  }
  std::vector<std::size_t> old_pred(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) old_pred[i] = pred_[path[i]];
  for (int w : path) detach(w);
  attach(u_in, v_in);
  pred_[u_in] = entering;
  for (std::size_t i = 1; i < path.size(); ++i) {
    attach(path[i], path[i - 1]);
    pred_[path[i]] = old_pred[i - 1];
  }
  refresh_subtree(u_in);
  return true;
}

void NetworkSimplex::solve() {
  const std::size_t arc_count = tail_.size();
  const std::size_t real_count = arc_count - first_real_;
  if (real_count == 0) return;
  const std::size_t block =
      std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(real_count))));
  const std::size_t max_pivots = 1000 * (arc_count + 1000);

  if (next_arc_ < first_real_ || next_arc_ >= arc_count) next_arc_ = first_real_;
  for (std::size_t pivots = 0;; ++pivots) {
    if (pivots > max_pivots) throw ConvergenceError("network simplex: pivot limit reached", 0.0);
    double best_rc = -eps_;
    std::size_t best = arc_count;
    std::size_t scanned = 0;
    std::size_t count = block;
    std::size_t e = next_arc_;
    while (scanned < real_count) {
      const double rc = cost_[e] + pot_[tail_[e]] - pot_[head_[e]];
      if (rc < best_rc) {
        best_rc = rc;
        best = e;
      }
      ++scanned;
      if (++e == arc_count) e = first_real_;
      if (--count == 0) {
        if (best != arc_count) break;
        count = block;
      }
    }
    if (best == arc_count) return;
    next_arc_ = e;
    if (!pivot(best)) throw ConvergenceError("network simplex: unbounded cycle", 0.0);
  }
}

}  // namespace cdlab::detail
