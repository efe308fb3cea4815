#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cdlab::detail {

// Primal network simplex for an uncapacitated bipartite transportation
// problem. Sources are nodes [0, n_sources), sinks follow, and one extra
// root node carries the artificial arcs of the initial basis. Real arcs may
// be appended between solves; the previous basis is kept as a warm start.
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand, double max_cost);

  void add_arc(int source, int sink, double cost);
  std::size_t real_arc_count() const { return tail_.size() - first_real_; }

  // Runs pivots until no real arc has negative reduced cost.
  void solve();

  // Reduced cost of a prospective arc: cost + pi(source) - pi(sink).
  double reduced_cost(int source, int sink, double cost) const {
    return cost + pot_[source] - pot_[n_sources_ + sink];
  }
  double tolerance() const { return eps_; }

  int real_arc_source(std::size_t k) const { return tail_[first_real_ + k]; }
  int real_arc_sink(std::size_t k) const { return head_[first_real_ + k] - n_sources_; }
  double real_arc_flow(std::size_t k) const { return flow_[first_real_ + k]; }

  // Largest flow left on an artificial arc.
  double artificial_flow() const;

 private:
  void detach(int node);
  void attach(int node, int parent);
  void refresh_subtree(int top);
  bool pivot(std::size_t entering);

  int n_sources_;
  int n_sinks_;
  int root_;
  double art_cost_;
  double eps_;

  // Arcs.
  std::vector<int> tail_;
  std::vector<int> head_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::size_t first_real_;
  std::size_t next_arc_ = 0;

  // Spanning tree.
  std::vector<int> parent_;
  std::vector<std::size_t> pred_;
  std::vector<int> first_child_;
  std::vector<int> next_sibling_;
  std::vector<int> prev_sibling_;
  std::vector<int> depth_;
  std::vector<double> pot_;
  std::vector<int> stack_;
};

}  // namespace cdlab::detail
