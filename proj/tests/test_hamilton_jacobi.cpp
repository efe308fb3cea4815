#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cdlab/errors.hpp"
#include "cdlab/functionals.hpp"
#include "cdlab/hamilton_jacobi.hpp"
#include "doctest.h"

using namespace cdlab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ScalarField single_source(const SampledSpacePtr& s, std::size_t node) {
  std::vector<double> v(s->size(), kInf);
  v[node] = 0.0;
  return ScalarField(s, v);
}

// max over x of min_z [d(z,y0)^2/2t0 + d(x,z)^2/2t1] - d(x,y0)^2/2(t0+t1), by brute force.
double single_source_defect(const SampledSpace& s, std::size_t y0, double t0, double t1) {
  const auto& space = s.space();
  double worst = -kInf;
  for (std::size_t x = 0; x < s.size(); ++x) {
    double composed = kInf;
    for (std::size_t z = 0; z < s.size(); ++z) {
      const double a = space.distance(s.node(z), s.node(y0));
      const double b = space.distance(s.node(x), s.node(z));
      composed = std::min(composed, a * a / (2.0 * t0) + b * b / (2.0 * t1));
    }
    const double d = space.distance(s.node(x), s.node(y0));
    worst = std::max(worst, composed - d * d / (2.0 * (t0 + t1)));
  }
  return worst;
}

struct Pipeline {
  DiscreteMeasure mu0;
  DiscreteMeasure mu1;
  PotentialPair pair;
  DynamicalCoupling coupling;
};

Pipeline solve(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  const auto plan = solve_exact(mu0, mu1);
  return {mu0, mu1, dual_potentials(mu0, mu1, plan), dynamical_coupling(plan)};
}

}  // namespace

TEST_CASE("shift of the zero field is zero") {
  const auto s = SampledSpace::sample(ModelSpace::round_sphere(1.0), 16);
  const ScalarField zero(s, std::vector<double>(s->size(), 0.0));
  for (double t : {0.1, 0.5, 1.0, 3.0}) {
    const auto shifted = hj_shift(zero, t);
    for (double v : shifted.values()) CHECK(v == 0.0);
  }
  CHECK(semigroup_defect(zero, 0.3, 0.4) == 0.0);
}

TEST_CASE("single source shifts to a scaled squared distance") {
  for (const auto& space : {ModelSpace::euclidean_box(1.0), ModelSpace::flat_torus(1.0),
                            ModelSpace::flat_cone(1.5 * std::numbers::pi, 1.0), ModelSpace::hyperbolic_disk(0.8)}) {
    const auto s = SampledSpace::sample(space, 24);
    const std::size_t y0 = s->index(7, 11);
    const auto f = hj_shift(single_source(s, y0), 0.4);
    for (std::size_t x = 0; x < s->size(); ++x) {
      const double d = space.distance(s->node(x), s->node(y0));
      CHECK(f[x] == doctest::Approx(d * d / 0.8).epsilon(1e-12).scale(1e-12));
    }
  }
}

TEST_CASE("linear field on the unit interval shifts to x^2/2") {
  // Oracle: brute-force minimum over 10^4 nodes against the clipped closed form.
  const int fine = 10000;
  for (double x : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    double best = kInf;
    for (int k = 0; k < fine; ++k) {
      const double y = (k + 0.5) / fine;
      best = std::min(best, y + 0.5 * (x - y) * (x - y));
    }
    CHECK(std::abs(best - 0.5 * x * x) <= 1.0 / fine);
  }

  const int res = 256;
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0, 1), res);
  const auto f = ScalarField::from_function(s, [](const Point& p) { return p.c0; });
  const auto shifted = hj_shift(f, 1.0);
  for (std::size_t i = 0; i < s->size(); ++i) {
    const double x = s->node(i).c0;
    CHECK(std::abs(shifted[i] - 0.5 * x * x) <= 1.0 / res);
    CHECK(std::abs(hj_value_at(f, 1.0, Point{x, 0.0}) - shifted[i]) <= 1e-15);
  }
}

TEST_CASE("undefined and ill-posed shifts") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 4);
  CHECK_THROWS_AS(ScalarField(s, std::vector<double>(s->size(), kInf)), ShiftError);
  std::vector<double> v(s->size(), 1.0);
  v[3] = -kInf;
  const ScalarField bad(s, v);
  CHECK_THROWS_AS(hj_shift(bad, 0.5), ShiftError);
  v[3] = std::nan("");
  CHECK_THROWS_AS(ScalarField(s, v), PreconditionError);
  const ScalarField ok(s, std::vector<double>(s->size(), 1.0));
  CHECK_THROWS_AS(hj_shift(ok, 0.0), PreconditionError);
  CHECK_THROWS_AS(hj_shift(ok, -1.0), PreconditionError);
}

TEST_CASE("semigroup defect of a single source is the midpoint gap") {
  const auto space = ModelSpace::euclidean_box(1.0);
  double previous = kInf;
  for (int res : {8, 16}) {
    const auto s = SampledSpace::sample(space, res);
    const std::size_t y0 = s->index(1, res - 2);
    const double defect = semigroup_defect(single_source(s, y0), 0.3, 0.5);
    CHECK(defect == doctest::Approx(single_source_defect(*s, y0, 0.3, 0.5)).epsilon(1e-12).scale(1e-12));
    CHECK(defect >= -1e-12);
    CHECK(defect < previous);
    previous = defect;
  }
}

TEST_CASE("semigroup defect of a smooth field shrinks under refinement") {
  const auto space = ModelSpace::euclidean_box(1.0);
  auto quadratic = [](const Point& p) { return (p.c0 - 0.3) * (p.c0 - 0.3) + (p.c1 - 0.6) * (p.c1 - 0.6); };
  const double coarse = semigroup_defect(ScalarField::from_function(SampledSpace::sample(space, 64), quadratic), 0.2, 0.3);
  const double fine = semigroup_defect(ScalarField::from_function(SampledSpace::sample(space, 128), quadratic), 0.2, 0.3);
  CHECK(coarse >= -1e-12);
  CHECK(fine >= -1e-12);
  CHECK(fine < coarse);
}

TEST_CASE("shift properties on random fields") {
  for (const auto& space : {ModelSpace::flat_torus(1.0), ModelSpace::round_sphere(1.0)}) {
    const auto s = SampledSpace::sample(space, 24);
    const auto f = random_lipschitz_field(s, 3);
    Rng rng(11);
    std::vector<double> above(f.values());
    std::vector<double> lifted(f.values());
    for (auto& v : above) v += rng.uniform();
    for (auto& v : lifted) v += 0.75;
    const auto hf = hj_shift(f, 0.3);
    const auto hg = hj_shift(ScalarField(s, above), 0.3);
    const auto hc = hj_shift(ScalarField(s, lifted), 0.3);
    for (std::size_t i = 0; i < s->size(); ++i) {
      CHECK(hf[i] <= hg[i]);
      CHECK(hc[i] == doctest::Approx(hf[i] + 0.75).epsilon(1e-14).scale(1e-14));
      CHECK(hf[i] <= f[i]);
    }
  }
}

TEST_CASE("shift family caches its grid times") {
  const auto s = SampledSpace::sample(ModelSpace::flat_torus(1.0), 16);
  const ShiftFamily family(random_lipschitz_field(s, 1), {0.25, 0.5, 1.0});
  const auto& a = family.at(0.5);
  CHECK(&a == &family.at(0.5));
  CHECK(a.values() == hj_shift(family.base(), 0.5).values());
  CHECK_THROWS_AS(family.at(0.4), PreconditionError);
  CHECK_THROWS_AS(ShiftFamily(family.base(), {0.0, 0.5}), PreconditionError);
  CHECK(family.value_at(0.5, s->node(17)) == a[17]);
}

TEST_CASE("1/t-concavity of shifted families") {
  SUBCASE("zero field passes strictly") {
    const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 16);
    const ShiftFamily family(ScalarField(s, std::vector<double>(s->size(), 0.0)), {0.5});
    CHECK(family_concavity_check(family, 0.5, random_segments(s->space(), 20, 2)).pass);
    // Off the nodes the sampled shift is the distance to the nearest node, so
    // strictness is checked on segments whose sample points are nodes.
    const std::vector<GeodesicSegment> rows{{s->node(s->index(2, 1)), s->node(s->index(2, 9))},
                                            {s->node(s->index(3, 3)), s->node(s->index(11, 11))}};
    const auto r = family_concavity_check(family, 0.5, rows, 9);
    CHECK(r.pass);
    CHECK(r.max_second_difference < 0.0);
  }
  SUBCASE("single source is exactly at the bound on lines through it") {
    const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 16);
    const std::size_t y0 = s->index(8, 8);
    const auto c = s->node(y0);
    const ShiftFamily family(single_source(s, y0), {0.25});
    const std::vector<GeodesicSegment> lines{{Point{c.c0 - 0.3, c.c1 - 0.2}, Point{c.c0 + 0.3, c.c1 + 0.2}},
                                             {Point{0.05, c.c1}, Point{0.95, c.c1}}};
    const auto r = family_concavity_check(family, 0.25, lines, 9);
    CHECK(r.pass);
    CHECK(std::abs(r.max_second_difference) <= 1e-12);
  }
  SUBCASE("random field on the torus") {
    const auto s = SampledSpace::sample(ModelSpace::flat_torus(1.0), 48);
    const ShiftFamily family(random_lipschitz_field(s, 5), {0.5});
    const auto r = family_concavity_check(family, 0.5, random_segments(s->space(), 50, 6));
    CHECK(r.pass);
    CHECK(r.segments == 50);
  }
  SUBCASE("negative curvature breaks the bound") {
    const auto s = SampledSpace::sample(ModelSpace::hyperbolic_disk(0.8), 32);
    const ShiftFamily family(single_source(s, s->snap(Point{0.0, 0.0})), {0.5});
    const auto r = family_concavity_check(family, 0.5, random_segments(s->space(), 50, 8));
    CHECK_FALSE(r.pass);
    CHECK(r.worst_segment.has_value());
  }
}

TEST_CASE("potentials of a point-mass transport") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 16);
  const auto p = solve(DiscreteMeasure::point_mass(s, s->index(2, 3)), DiscreteMeasure::point_mass(s, s->index(12, 9)));
  for (double t : {0.25, 0.5, 0.75}) {
    const auto r = potential_interpolation_check(p.pair, p.coupling, t);
    CHECK(r.pass);
    CHECK(r.min_sum >= -r.tolerance);
    CHECK(r.max_identity_error <= 1e-12);
    CHECK(r.checked_rays == 1);
  }
  CHECK_THROWS_AS(potential_interpolation_check(p.pair, p.coupling, 1.0), PreconditionError);
}

TEST_CASE("potentials of the identity transport") {
  const auto s = SampledSpace::sample(ModelSpace::flat_torus(1.0), 16);
  const auto mu = DiscreteMeasure::uniform_on(s, [](const Point& q) { return q.c0 < 0.4; });
  const auto p = solve(mu, mu);
  const auto r = potential_interpolation_check(p.pair, p.coupling, 0.5);
  CHECK(r.pass);
  CHECK(r.min_sum >= -1e-12);
  CHECK(r.max_support_sum <= 1e-12);
}

TEST_CASE("two-by-two instance interpolates its potentials") {
  // Box of side 2 at resolution 128: the rays' midpoints fall on nodes.
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(2.0), 128);
  std::vector<double> w0(s->size(), 0.0);
  std::vector<double> w1(s->size(), 0.0);
  w0[s->snap(Point{0.5, 0.5})] = w0[s->snap(Point{1.5, 0.5})] = 0.5;
  w1[s->snap(Point{0.5, 1.5})] = w1[s->snap(Point{1.5, 1.5})] = 0.5;
  const auto p = solve(DiscreteMeasure(s, w0), DiscreteMeasure(s, w1));
  const auto r = potential_interpolation_check(p.pair, p.coupling, 0.5);
  CHECK(r.pass);
  CHECK(r.min_sum >= -1e-6);
  CHECK(r.max_support_sum <= 1e-6);
  CHECK(r.max_identity_error <= 1e-6);
  CHECK(r.checked_rays == 2);
}

TEST_CASE("potential interpolation on random trials") {
  for (const auto& space : {ModelSpace::round_sphere(1.0), ModelSpace::flat_cone(1.5 * std::numbers::pi, 1.0)}) {
    const auto s = SampledSpace::sample(space, 32);
    const auto pipe = build_pipeline(draw_trial(space, 7, 1), s);
    for (double t : {0.25, 0.5, 0.75}) {
      const auto r = potential_interpolation_check(pipe.potentials, pipe.coupling, t);
      CHECK(r.pass);
      CHECK(r.tolerance >= potential_tolerance(*s, t));
    }
  }
}

TEST_CASE("reverse contraction factor") {
  CHECK(reverse_contraction_factor(0.25, 0.5) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  CHECK(reverse_contraction_factor(0.5, 0.5) == 1.0);
}

TEST_CASE("parallel rays keep their distance") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 16);
  std::vector<double> w0(s->size(), 0.0);
  std::vector<double> w1(s->size(), 0.0);
  w0[s->index(2, 2)] = w0[s->index(2, 6)] = 0.5;
  w1[s->index(5, 4)] = w1[s->index(5, 8)] = 0.5;
  const auto p = solve(DiscreteMeasure(s, w0), DiscreteMeasure(s, w1));
  const auto r = reverse_contraction_check(p.coupling, 0.25, 0.5, 10, 1);
  CHECK(r.pass);
  // l is constant, so the shortfall is (factor - 1) * l.
  const double l = s->space().distance(s->node(s->index(2, 2)), s->node(s->index(2, 6)));
  CHECK(r.max_shortfall == doctest::Approx((2.0 / 9.0 - 1.0) * l).epsilon(1e-12));

  const auto single = solve(DiscreteMeasure::point_mass(s, 3), DiscreteMeasure::point_mass(s, 40));
  CHECK_THROWS_AS(reverse_contraction_check(single.coupling, 0.25, 0.5, 10, 1), PreconditionError);
  CHECK_THROWS_AS(reverse_contraction_check(p.coupling, 0.5, 0.25, 10, 1), PreconditionError);
}

TEST_CASE("reverse contraction on a random torus plan") {
  const auto space = ModelSpace::flat_torus(1.0);
  const auto pipe = build_pipeline(draw_trial(space, 7, 4), SampledSpace::sample(space, 32));
  for (auto [t0, t1] : {std::pair{0.25, 0.5}, std::pair{0.1, 0.9}}) {
    const auto r = reverse_contraction_check(pipe.coupling, t0, t1, 100, 3);
    CHECK(r.pass);
    CHECK(r.pairs == 100);
  }
}

TEST_CASE("field csv") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 2);
  std::ostringstream out;
  write_field_csv(out, ScalarField(s, {0.0, 0.5, kInf, -1.0}));
  CHECK(out.str() == "node,value\n0,0\n1,0.5\n2,inf\n3,-1\n");
}
