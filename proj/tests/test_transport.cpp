#include <cmath>
#include <numbers>
#include <sstream>

#include "cdlab/errors.hpp"
#include "cdlab/random.hpp"
#include "cdlab/transport.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cdlab;

namespace {

// Box of side 2 at resolution 2: nodes (.5,.5),(.5,1.5),(1.5,.5),(1.5,1.5), a unit
// square shifted by (.5,.5).
SampledSpacePtr square_grid() { return SampledSpace::sample(ModelSpace::euclidean_box(2.0), 2); }

DiscreteMeasure random_measure(const SampledSpacePtr& s, Rng& rng, std::size_t support) {
  std::vector<double> w(s->size(), 0.0);
  for (std::size_t k = 0; k < support; ++k) w[rng.below(s->size())] += 0.05 + rng.uniform();
  return DiscreteMeasure::normalized(s, w);
}

void check_plan(const TransportPlan& plan, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  CHECK(marginal_error(plan, mu0, mu1) <= 1e-10);
  for (const auto& c : plan.couplings) CHECK(c.mass >= 0.0);
}

}  // namespace

TEST_CASE("measure validation") {
  const auto s = square_grid();
  CHECK_THROWS_AS(DiscreteMeasure(s, {0.5, 0.5, 0.5, 0.0}), PreconditionError);
  CHECK_THROWS_AS(DiscreteMeasure(s, {1.5, -0.5, 0.0, 0.0}), PreconditionError);
  CHECK_THROWS_AS(DiscreteMeasure(s, {1.0}), PreconditionError);
  const auto u = DiscreteMeasure::uniform_on(s, [](const Point& p) { return p.c0 < 1.0; });
  CHECK(u.support() == std::vector<std::size_t>{0, 1});
}

TEST_CASE("identical measures give the identity plan") {
  const auto s = SampledSpace::sample(ModelSpace::flat_torus(1.0), 6);
  Rng rng(1);
  const auto mu = random_measure(s, rng, 10);
  const auto plan = solve_exact(mu, mu);
  check_plan(plan, mu, mu);
  CHECK(plan.cost == 0.0);
  for (const auto& c : plan.couplings) CHECK(c.source == c.target);
  CHECK(w2_distance(plan) == 0.0);
  const auto pair = dual_potentials(mu, mu, plan);
  for (auto i : mu.support()) {
    CHECK(pair.psi[i] == doctest::Approx(0.0).scale(1e-12));
    CHECK(pair.phi[i] == doctest::Approx(0.0).scale(1e-12));
  }
}

TEST_CASE("point masses") {
  const auto s = SampledSpace::sample(ModelSpace::round_sphere(1.0), 8);
  const auto a = DiscreteMeasure::point_mass(s, 3);
  const auto b = DiscreteMeasure::point_mass(s, 40);
  const double d = s->space().distance(s->node(3), s->node(40));
  const auto plan = solve_exact(a, b);
  REQUIRE(plan.couplings.size() == 1);
  CHECK(plan.cost == doctest::Approx(0.5 * d * d).epsilon(1e-15));
  CHECK(w2_distance(plan) == doctest::Approx(d).epsilon(1e-14));
  const auto pair = dual_potentials(a, b, plan);
  CHECK(pair.psi[3] == 0.0);
  CHECK(pair.phi[40] == doctest::Approx(0.5 * d * d).epsilon(1e-14));
  CHECK(std::isinf(pair.psi[4]));
  CHECK(pair.psi[4] > 0);
  CHECK(std::isinf(pair.phi[4]));
  CHECK(pair.phi[4] < 0);
  const auto ent = solve_entropic(a, b, 0.1);
  CHECK(ent.cost == doctest::Approx(0.5 * d * d).epsilon(1e-8));
}

TEST_CASE("two-by-two instance") {
  const auto s = square_grid();
  const auto src = DiscreteMeasure(s, {0.5, 0.0, 0.5, 0.0});
  const auto dst = DiscreteMeasure(s, {0.0, 0.5, 0.0, 0.5});
  // Both feasible matchings enumerated by hand: vertical costs 1/2 * 1/2 * 2 = 1/2,
  // crossed costs 1/2 * (1/2 * 2) * 2 = 1.
  const double vertical = 0.5 * (0.5 * 1.0) + 0.5 * (0.5 * 1.0);
  const double crossed = 0.5 * (0.5 * 2.0) + 0.5 * (0.5 * 2.0);
  const auto plan = solve_exact(src, dst);
  check_plan(plan, src, dst);
  CHECK(plan.cost == doctest::Approx(std::min(vertical, crossed)).epsilon(1e-15));
  CHECK(plan.cost == doctest::Approx(0.5));
  REQUIRE(plan.couplings.size() == 2);
  CHECK(plan.couplings[0].source == 0);
  CHECK(plan.couplings[0].target == 1);
  CHECK(plan.couplings[1].source == 2);
  CHECK(plan.couplings[1].target == 3);
  CHECK(w2_distance(plan) == doctest::Approx(1.0));

  const auto pair = dual_potentials(src, dst, plan);
  CHECK(pair.gap <= 1e-9);
  for (const auto& c : plan.couplings) {
    CHECK(pair.phi[c.target] - pair.psi[c.source] == doctest::Approx(0.5).epsilon(1e-9));
  }

  const auto ent = solve_entropic(src, dst, 1e-3);
  CHECK(std::abs(ent.cost - 0.5) <= 1e-2);
  CHECK(ent.cost >= plan.cost - 1e-12);
  CHECK(marginal_error(ent, src, dst) <= 1e-8);
}

TEST_CASE("entropic bias on identical measures") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 5);
  Rng rng(9);
  const auto mu = random_measure(s, rng, 8);
  for (double eps : {0.1, 0.01, 0.001}) {
    const auto ent = solve_entropic(mu, mu, eps);
    CHECK(ent.cost <= eps * std::log(static_cast<double>(mu.support().size())));
    CHECK(marginal_error(ent, mu, mu) <= 1e-8);
  }
}

TEST_CASE("entropic cost approaches exact cost") {
  const auto s = SampledSpace::sample(ModelSpace::flat_torus(1.0), 6);
  Rng rng(21);
  const auto a = random_measure(s, rng, 6);
  const auto b = random_measure(s, rng, 6);
  const double exact = solve_exact(a, b).cost;
  double previous = INFINITY;
  for (double eps : {0.05, 0.01, 0.002}) {
    const double gap = solve_entropic(a, b, eps).cost - exact;
    CHECK(gap >= -1e-9);
    CHECK(gap < previous);
    previous = gap;
  }
}

TEST_CASE("exact solver matches brute-force enumeration") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 8);
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_measure(s, rng, 1 + rng.below(4));
    const auto b = random_measure(s, rng, 1 + rng.below(4));
    std::vector<double> supply, demand, cost;
    for (auto i : a.support()) supply.push_back(a.weight(i));
    for (auto j : b.support()) demand.push_back(b.weight(j));
    for (auto i : a.support()) {
      for (auto j : b.support()) cost.push_back(half_squared_distance(s->space(), s->node(i), s->node(j)));
    }
    const auto plan = solve_exact(a, b);
    check_plan(plan, a, b);
    CHECK(std::abs(plan.cost - oracle::brute_force_transport(supply, demand, cost)) <= 1e-12);
    CHECK(plan.couplings.size() <= a.support().size() + b.support().size() - 1);
    const auto pair = dual_potentials(a, b, plan);
    CHECK(pair.gap <= 1e-9);
  }
}

TEST_CASE("larger instances: duality, monotonicity, triangle inequality") {
  for (const auto& space : {ModelSpace::euclidean_box(1.0), ModelSpace::flat_torus(1.0),
                            ModelSpace::round_sphere(1.0), ModelSpace::flat_cone(1.5 * std::numbers::pi, 1.0),
                            ModelSpace::hyperbolic_disk(0.8)}) {
    CAPTURE(space.name());
    const auto s = SampledSpace::sample(space, 16);
    Rng rng(77);
    const auto a = random_measure(s, rng, 60);
    const auto b = random_measure(s, rng, 50);
    const auto c = random_measure(s, rng, 40);
    const auto ab = solve_exact(a, b);
    check_plan(ab, a, b);
    CHECK(ab.couplings.size() <= a.support().size() + b.support().size() - 1);
    const auto pair = dual_potentials(a, b, ab);
    CHECK(pair.gap <= 1e-9);
    CHECK(pair.violation <= 1e-9);
    for (const auto& cp : ab.couplings) {
      const double cost = half_squared_distance(space, s->node(cp.source), s->node(cp.target));
      CHECK(std::abs(pair.phi[cp.target] - pair.psi[cp.source] - cost) <= 1e-9);
    }
    for (int k = 0; k < 200; ++k) {
      const auto& p = ab.couplings[rng.below(ab.couplings.size())];
      const auto& q = ab.couplings[rng.below(ab.couplings.size())];
      auto h = [&](std::size_t i, std::size_t j) { return half_squared_distance(space, s->node(i), s->node(j)); };
      CHECK(h(p.source, p.target) + h(q.source, q.target) <= h(p.source, q.target) + h(q.source, p.target) + 1e-9);
    }
    const double dab = w2_distance(ab);
    const double dbc = w2_distance(solve_exact(b, c));
    const double dac = w2_distance(solve_exact(a, c));
    CHECK(dac <= dab + dbc + 1e-7);
  }
}

TEST_CASE("capacity cap and non-optimal plans") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 4);
  const auto u = DiscreteMeasure::uniform_on(s, [](const Point&) { return true; });
  CHECK_THROWS_AS(solve_exact(u, u, ExactOptions{8}), CapacityError);

  const auto s2 = square_grid();
  const auto src = DiscreteMeasure(s2, {0.5, 0.0, 0.5, 0.0});
  const auto dst = DiscreteMeasure(s2, {0.0, 0.5, 0.0, 0.5});
  TransportPlan crossed{s2, {{0, 3, 0.5}, {2, 1, 0.5}}, 1.0};
  CHECK_THROWS_AS(dual_potentials(src, dst, crossed), CertificationError);
}

TEST_CASE("plan csv") {
  const auto s = square_grid();
  const auto plan = solve_exact(DiscreteMeasure::point_mass(s, 0), DiscreteMeasure::point_mass(s, 3));
  std::ostringstream out;
  write_plan_csv(out, plan);
  CHECK(out.str() == "source,target,mass\n0,3,1\n");
}
