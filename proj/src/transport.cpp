#include "cdlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <string>

#include "cdlab/errors.hpp"
#include "format.hpp"
#include "network_simplex.hpp"

namespace cdlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

long double accurate_sum(std::span<const double> values) {
  long double total = 0.0L;
  for (double v : values) total += v;
  return total;
}

void check_same_space(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  if (mu0.space_ptr() != mu1.space_ptr()) {
    throw PreconditionError("transport: measures live on different sampled spaces");
  }
}

// Row-major n0 x n1 matrix of d^2/2 between the two supports.
std::vector<double> cost_matrix(const SampledSpace& space, const std::vector<std::size_t>& rows,
                                const std::vector<std::size_t>& cols) {
  std::vector<double> c(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Point& x = space.node(rows[i]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      c[i * cols.size() + j] = half_squared_distance(space.space(), x, space.node(cols[j]));
    }
  }
  return c;
}

double plan_cost(const SampledSpace& space, const std::vector<Coupling>& couplings) {
  long double total = 0.0L;
  for (const auto& c : couplings) {
    total += c.mass * half_squared_distance(space.space(), space.node(c.source), space.node(c.target));
  }
  return static_cast<double>(total);
}

std::vector<double> support_weights(const DiscreteMeasure& mu) {
  std::vector<double> w;
  w.reserve(mu.support().size());
  for (auto i : mu.support()) w.push_back(mu.weight(i));
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// DiscreteMeasure

DiscreteMeasure::DiscreteMeasure(SampledSpacePtr space, std::vector<double> weights)
    : space_(std::move(space)), weights_(std::move(weights)) {
  if (!space_) throw PreconditionError("measure: missing sampled space");
  if (weights_.size() != space_->size()) {
    throw PreconditionError("measure: weight count does not match node count");
  }
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw PreconditionError("measure: weight at node " + std::to_string(i) +
                              " is negative or not finite");
    }
    if (w > 0.0) {
      if (!(space_->cell_volume(i) > 0.0)) {
        throw SingularityError("measure: mass on zero-volume cell " + std::to_string(i));
      }
      support_.push_back(i);
    }
  }
  const long double total = accurate_sum(weights_);
  if (std::abs(static_cast<double>(total - 1.0L)) > 1e-12) {
    throw PreconditionError("measure: weights sum to " + format_double(static_cast<double>(total)) +
                            ", not 1");
  }
}

DiscreteMeasure DiscreteMeasure::normalized(SampledSpacePtr space, std::vector<double> weights) {
  const long double total = accurate_sum(weights);
  if (!(total > 0.0L)) throw PreconditionError("measure: weights have no positive mass");
  for (double& w : weights) w = static_cast<double>(w / total);
  return {std::move(space), std::move(weights)};
}

DiscreteMeasure DiscreteMeasure::point_mass(SampledSpacePtr space, std::size_t node) {
  if (!space || node >= space->size()) throw PreconditionError("point_mass: node out of range");
  std::vector<double> w(space->size(), 0.0);
  w[node] = 1.0;
  return {std::move(space), std::move(w)};
}

DiscreteMeasure DiscreteMeasure::uniform_on(SampledSpacePtr space,
                                            const std::function<bool(const Point&)>& inside) {
  if (!space) throw PreconditionError("uniform_on: missing sampled space");
  std::vector<double> w(space->size(), 0.0);
  for (std::size_t i = 0; i < space->size(); ++i) {
    if (inside(space->node(i))) w[i] = space->cell_volume(i);
  }
  return normalized(std::move(space), std::move(w));
}

// ---------------------------------------------------------------------------
// Solvers

double half_squared_distance(const ModelSpace& space, const Point& x, const Point& y) {
  const double d = space.distance(x, y);
  return 0.5 * d * d;
}

TransportPlan solve_exact(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                          const ExactOptions& options) {
  check_same_space(mu0, mu1);
  const SampledSpace& space = mu0.space();
  const auto& s0 = mu0.support();
  const auto& s1 = mu1.support();
  if (s0.size() > options.support_cap || s1.size() > options.support_cap) {
    throw CapacityError("solve_exact: support size exceeds cap of " +
                        std::to_string(options.support_cap) + "; use solve_entropic");
  }

  TransportPlan plan{mu0.space_ptr(), {}, 0.0};
  if (s0.size() == 1 || s1.size() == 1) {
    for (auto i : s0) {
      for (auto j : s1) plan.couplings.push_back({i, j, mu0.weight(i) * mu1.weight(j)});
    }
    plan.cost = plan_cost(space, plan.couplings);
    return plan;
  }

  const std::size_t n0 = s0.size();
  const std::size_t n1 = s1.size();
  const std::vector<double> c = cost_matrix(space, s0, s1);
  const double max_cost = *std::max_element(c.begin(), c.end());
  const std::vector<double> supply = support_weights(mu0);
  const std::vector<double> demand = support_weights(mu1);

  detail::NetworkSimplex simplex(supply, demand, max_cost);
  std::vector<char> present(n0 * n1, 0);
  auto add = [&](std::size_t i, std::size_t j) {
    if (present[i * n1 + j]) return;
    present[i * n1 + j] = 1;
    simplex.add_arc(static_cast<int>(i), static_cast<int>(j), c[i * n1 + j]);
  };

  // Seed with the cheapest arcs per row and per column.
  const std::size_t k_row = std::min<std::size_t>(12, n1);
  const std::size_t k_col = std::min<std::size_t>(12, n0);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n0; ++i) {
    order.resize(n1);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_row), order.end(),
                      [&](std::size_t a, std::size_t b) { return c[i * n1 + a] < c[i * n1 + b]; });
    for (std::size_t k = 0; k < k_row; ++k) add(i, order[k]);
  }
  for (std::size_t j = 0; j < n1; ++j) {
    order.resize(n0);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_col), order.end(),
                      [&](std::size_t a, std::size_t b) { return c[a * n1 + j] < c[b * n1 + j]; });
    for (std::size_t k = 0; k < k_col; ++k) add(order[k], j);
  }

  // Column generation: price every pair against the current duals.
  std::vector<std::pair<double, std::size_t>> negative;
  for (;;) {
    simplex.solve();
    std::size_t added = 0;
    for (std::size_t i = 0; i < n0; ++i) {
      negative.clear();
      for (std::size_t j = 0; j < n1; ++j) {
        if (present[i * n1 + j]) continue;
        const double rc = simplex.reduced_cost(static_cast<int>(i), static_cast<int>(j), c[i * n1 + j]);
        if (rc < -simplex.tolerance()) negative.emplace_back(rc, j);
      }
      if (negative.size() > k_row) {
        std::nth_element(negative.begin(), negative.begin() + static_cast<std::ptrdiff_t>(k_row),
                         negative.end());
        negative.resize(k_row);
      }
      for (const auto& [rc, j] : negative) add(i, j);
      added += negative.size();
    }
    if (added == 0) break;
  }

  if (simplex.artificial_flow() > 1e-12) {
    throw ConvergenceError("solve_exact: artificial arcs carry flow; marginals unbalanced",
                           simplex.artificial_flow());
  }
  for (std::size_t k = 0; k < simplex.real_arc_count(); ++k) {
    const double f = simplex.real_arc_flow(k);
    if (f > 0.0) {
      plan.couplings.push_back({s0[static_cast<std::size_t>(simplex.real_arc_source(k))],
                                s1[static_cast<std::size_t>(simplex.real_arc_sink(k))], f});
    }
  }
  std::sort(plan.couplings.begin(), plan.couplings.end(), [](const Coupling& a, const Coupling& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  plan.cost = plan_cost(space, plan.couplings);
  return plan;
}

TransportPlan solve_entropic(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, double epsilon,
                             const EntropicOptions& options) {
  check_same_space(mu0, mu1);
  if (!(epsilon > 0.0)) throw PreconditionError("solve_entropic: epsilon must be positive");
  const SampledSpace& space = mu0.space();
  const auto& s0 = mu0.support();
  const auto& s1 = mu1.support();
  const std::size_t n0 = s0.size();
  const std::size_t n1 = s1.size();
  const std::vector<double> c = cost_matrix(space, s0, s1);
  std::vector<double> log_a(n0), log_b(n1);
  for (std::size_t i = 0; i < n0; ++i) log_a[i] = std::log(mu0.weight(s0[i]));
  for (std::size_t j = 0; j < n1; ++j) log_b[j] = std::log(mu1.weight(s1[j]));

  std::vector<double> f(n0, 0.0), g(n1, 0.0), buf;
  auto log_sum_exp = [](const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
  };
  auto log_plan = [&](std::size_t i, std::size_t j) {
    return (f[i] + g[j] - c[i * n1 + j]) / epsilon + log_a[i] + log_b[j];
  };

  // Over-relaxed log-domain updates.
  const double omega = options.relaxation;
  double residual = kInf;
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    const double relax = iteration == 0 ? 1.0 : omega;
    for (std::size_t i = 0; i < n0; ++i) {
      buf.resize(n1);
      for (std::size_t j = 0; j < n1; ++j) buf[j] = (g[j] - c[i * n1 + j]) / epsilon + log_b[j];
      f[i] += relax * (-epsilon * log_sum_exp(buf) - f[i]);
    }
    for (std::size_t j = 0; j < n1; ++j) {
      buf.resize(n0);
      for (std::size_t i = 0; i < n0; ++i) buf[i] = (f[i] - c[i * n1 + j]) / epsilon + log_a[i];
      g[j] += relax * (-epsilon * log_sum_exp(buf) - g[j]);
    }
    residual = 0.0;
    std::vector<double> col(n1, 0.0);
    for (std::size_t i = 0; i < n0; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n1; ++j) {
        const double m = std::exp(log_plan(i, j));
        row += m;
        col[j] += m;
      }
      residual = std::max(residual, std::abs(row - mu0.weight(s0[i])));
    }
    for (std::size_t j = 0; j < n1; ++j) residual = std::max(residual, std::abs(col[j] - mu1.weight(s1[j])));
    if (residual <= options.marginal_tolerance) break;
  }
  if (residual > options.marginal_tolerance) {
    throw ConvergenceError("solve_entropic: marginal residual above tolerance after " +
                               std::to_string(iteration) + " iterations",
                           residual);
  }

  // Round onto the exact transport polytope: shrink rows and columns that
  // overshoot, then spread the remaining deficit as a rank-one correction.
  std::vector<double> p(n0 * n1);
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) p[i * n1 + j] = std::exp(log_plan(i, j));
  }
  std::vector<double> err_row(n0), err_col(n1, 0.0);
  for (std::size_t i = 0; i < n0; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n1; ++j) row += p[i * n1 + j];
    const double target = mu0.weight(s0[i]);
    if (row > target) {
      for (std::size_t j = 0; j < n1; ++j) p[i * n1 + j] *= target / row;
    }
  }
  for (std::size_t j = 0; j < n1; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n0; ++i) col += p[i * n1 + j];
    const double target = mu1.weight(s1[j]);
    if (col > target) {
      for (std::size_t i = 0; i < n0; ++i) p[i * n1 + j] *= target / col;
      col = target;
    }
    err_col[j] = target - col;
  }
  double err_total = 0.0;
  for (std::size_t i = 0; i < n0; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n1; ++j) row += p[i * n1 + j];
    err_row[i] = std::max(0.0, mu0.weight(s0[i]) - row);
    err_total += err_row[i];
  }
  if (err_total > 0.0) {
    for (std::size_t i = 0; i < n0; ++i) {
      for (std::size_t j = 0; j < n1; ++j) p[i * n1 + j] += err_row[i] * err_col[j] / err_total;
    }
  }

  TransportPlan plan{mu0.space_ptr(), {}, 0.0};
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      if (p[i * n1 + j] > 0.0) plan.couplings.push_back({s0[i], s1[j], p[i * n1 + j]});
    }
  }
  plan.cost = plan_cost(space, plan.couplings);
  return plan;
}

// ---------------------------------------------------------------------------
// Duals

PotentialPair dual_potentials(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                              const TransportPlan& plan) {
  check_same_space(mu0, mu1);
  const SampledSpace& space = mu0.space();
  const auto& s0 = mu0.support();
  const auto& s1 = mu1.support();
  const std::size_t n0 = s0.size();
  const std::size_t n1 = s1.size();
  const std::vector<double> c = cost_matrix(space, s0, s1);

  std::vector<std::ptrdiff_t> local0(space.size(), -1), local1(space.size(), -1);
  for (std::size_t i = 0; i < n0; ++i) local0[s0[i]] = static_cast<std::ptrdiff_t>(i);
  for (std::size_t j = 0; j < n1; ++j) local1[s1[j]] = static_cast<std::ptrdiff_t>(j);

  // Plan graph: sources are vertices [0, n0), targets [n0, n0 + n1).
  std::vector<std::vector<std::size_t>> adj(n0 + n1);
  for (const auto& cp : plan.couplings) {
    const auto i = local0[cp.source];
    const auto j = local1[cp.target];
    if (i < 0 || j < 0) throw CertificationError("dual_potentials: plan leaves the supports", kInf);
    adj[static_cast<std::size_t>(i)].push_back(n0 + static_cast<std::size_t>(j));
    adj[n0 + static_cast<std::size_t>(j)].push_back(static_cast<std::size_t>(i));
  }

  // Tight potentials on each connected component of the plan graph.
  std::vector<double> psi(n0, 0.0), phi(n1, 0.0);
  std::vector<std::size_t> comp(n0 + n1, std::numeric_limits<std::size_t>::max());
  std::size_t n_comp = 0;
  std::queue<std::size_t> q;
  for (std::size_t start = 0; start < n0 + n1; ++start) {
    if (comp[start] != std::numeric_limits<std::size_t>::max()) continue;
    comp[start] = n_comp;
    q.push(start);
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      for (std::size_t w : adj[v]) {
        if (comp[w] != std::numeric_limits<std::size_t>::max()) continue;
        comp[w] = n_comp;
        if (v < n0) {
          phi[w - n0] = psi[v] + c[v * n1 + (w - n0)];
        } else {
          psi[w] = phi[v - n0] - c[w * n1 + (v - n0)];
        }
        q.push(w);
      }
    }
    ++n_comp;
  }

  // Component offsets from the difference constraints (Bellman-Ford).
  std::vector<double> shift(n_comp, 0.0);
  const double slack = 1e-13 * (1.0 + *std::max_element(c.begin(), c.end()));
  bool changed = true;
  for (std::size_t round = 0; changed; ++round) {
    if (round > n_comp) {
      throw CertificationError("dual_potentials: plan is not cyclically monotone", kInf);
    }
    changed = false;
    for (std::size_t i = 0; i < n0; ++i) {
      const std::size_t a = comp[i];
      for (std::size_t j = 0; j < n1; ++j) {
        const std::size_t b = comp[n0 + j];
        const double bound = shift[a] + c[i * n1 + j] + psi[i] - phi[j];
        if (bound < shift[b] - slack) {
          shift[b] = bound;
          changed = true;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n0; ++i) psi[i] += shift[comp[i]];
  for (std::size_t j = 0; j < n1; ++j) phi[j] += shift[comp[n0 + j]];

  // One round of alternating c-transforms.
  for (std::size_t j = 0; j < n1; ++j) {
    double best = kInf;
    for (std::size_t i = 0; i < n0; ++i) best = std::min(best, psi[i] + c[i * n1 + j]);
    phi[j] = best;
  }
  for (std::size_t i = 0; i < n0; ++i) {
    double best = -kInf;
    for (std::size_t j = 0; j < n1; ++j) best = std::max(best, phi[j] - c[i * n1 + j]);
    psi[i] = best;
  }
  const double offset = psi[0];
  for (double& v : psi) v -= offset;
  for (double& v : phi) v -= offset;

  PotentialPair pair;
  pair.psi.assign(space.size(), kInf);
  pair.phi.assign(space.size(), -kInf);
  long double dual = 0.0L;
  for (std::size_t i = 0; i < n0; ++i) {
    pair.psi[s0[i]] = psi[i];
    dual -= static_cast<long double>(psi[i]) * mu0.weight(s0[i]);
  }
  for (std::size_t j = 0; j < n1; ++j) {
    pair.phi[s1[j]] = phi[j];
    dual += static_cast<long double>(phi[j]) * mu1.weight(s1[j]);
  }
  double violation = -kInf;
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) violation = std::max(violation, phi[j] - psi[i] - c[i * n1 + j]);
  }
  pair.violation = violation;
  pair.gap = std::abs(static_cast<double>(dual) - plan.cost);
  if (pair.gap > 1e-9 || pair.violation > 1e-9) {
    throw CertificationError("dual_potentials: duality gap " + format_double(pair.gap) +
                                 ", constraint violation " + format_double(pair.violation),
                             pair.gap);
  }
  return pair;
}

double w2_distance(const TransportPlan& plan) { return std::sqrt(2.0 * std::max(0.0, plan.cost)); }

double marginal_error(const TransportPlan& plan, const DiscreteMeasure& mu0,
                      const DiscreteMeasure& mu1) {
  std::vector<long double> row(mu0.space().size(), 0.0L), col(mu1.space().size(), 0.0L);
  for (const auto& cp : plan.couplings) {
    row[cp.source] += cp.mass;
    col[cp.target] += cp.mass;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(row[i] - mu0.weight(i))));
    worst = std::max(worst, std::abs(static_cast<double>(col[i] - mu1.weight(i))));
  }
  return worst;
}

void write_plan_csv(std::ostream& out, const TransportPlan& plan) {
  out << "source,target,mass\n";
  for (const auto& c : plan.couplings) {
    out << c.source << ',' << c.target << ',' << format_double(c.mass) << '\n';
  }
}

void write_potentials_csv(std::ostream& out, const PotentialPair& pair) {
  out << "node,psi,phi\n";
  for (std::size_t i = 0; i < pair.psi.size(); ++i) {
    if (std::isinf(pair.psi[i]) && std::isinf(pair.phi[i])) continue;
    out << i << ',' << format_double(pair.psi[i]) << ',' << format_double(pair.phi[i]) << '\n';
  }
}

}  // namespace cdlab
