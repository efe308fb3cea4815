#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Minimum-cost transportation by enumerating every spanning-tree basis of the
// complete bipartite graph. Only for tiny instances (n0 * n1 <= 16).
inline double brute_force_transport(const std::vector<double>& supply,
                                    const std::vector<double>& demand,
                                    const std::vector<double>& cost) {
  const std::size_t n0 = supply.size();
  const std::size_t n1 = demand.size();
  const std::size_t edges = n0 * n1;
  const std::size_t nodes = n0 + n1;
  const std::size_t pick = nodes - 1;
  double best = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> chosen(pick);
  std::iota(chosen.begin(), chosen.end(), 0);
  for (;;) {
    // Spanning-tree test via union-find.
    std::vector<std::size_t> root(nodes);
    std::iota(root.begin(), root.end(), 0);
    auto find = [&](std::size_t v) {
      while (root[v] != v) v = root[v] = root[root[v]];
      return v;
    };
    bool tree = true;
    for (std::size_t e : chosen) {
      const std::size_t a = find(e / n1);
      const std::size_t b = find(n0 + e % n1);
      if (a == b) {
        tree = false;
        break;
      }
      root[a] = b;
    }
    if (tree) {
      // Leaf elimination gives the unique basic flow.
      std::vector<long double> balance(nodes);
      for (std::size_t i = 0; i < n0; ++i) balance[i] = supply[i];
      for (std::size_t j = 0; j < n1; ++j) balance[n0 + j] = -demand[j];
      std::vector<char> used(pick, 0);
      std::vector<long double> flow(pick, 0.0L);
      for (std::size_t round = 0; round < pick; ++round) {
        for (std::size_t v = 0; v < nodes; ++v) {
          std::size_t deg = 0, last = 0;
          for (std::size_t k = 0; k < pick; ++k) {
            if (used[k]) continue;
            const std::size_t e = chosen[k];
            if (e / n1 == v || n0 + e % n1 == v) {
              ++deg;
              last = k;
            }
          }
          if (deg != 1) continue;
          const std::size_t e = chosen[last];
          const bool is_source = v < n0;
          flow[last] = is_source ? balance[v] : -balance[v];
          balance[e / n1] -= flow[last];
          balance[n0 + e % n1] += flow[last];
          used[last] = 1;
          break;
        }
      }
      bool feasible = true;
      long double total = 0.0L;
      for (std::size_t k = 0; k < pick; ++k) {
        if (flow[k] < -1e-15L) feasible = false;
        total += flow[k] * cost[chosen[k]];
      }
      if (feasible) best = std::min(best, static_cast<double>(total));
    }
    // Next combination.
    std::size_t k = pick;
    while (k > 0 && chosen[k - 1] == edges - pick + (k - 1)) --k;
    if (k == 0) break;
    ++chosen[k - 1];
    for (std::size_t r = k; r < pick; ++r) chosen[r] = chosen[r - 1] + 1;
  }
  return best;
}

}  // namespace oracle
