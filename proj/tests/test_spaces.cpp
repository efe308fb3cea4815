#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "cdlab/errors.hpp"
#include "cdlab/random.hpp"
#include "cdlab/spaces.hpp"
#include "doctest.h"

using namespace cdlab;
using std::numbers::pi;

namespace {

std::vector<ModelSpace> all_spaces() {
  return {ModelSpace::euclidean_box(1.0), ModelSpace::euclidean_box(2.0, 1), ModelSpace::flat_torus(1.0),
          ModelSpace::round_sphere(1.0),  ModelSpace::flat_cone(1.5 * pi, 1.0),
          ModelSpace::flat_cone(3.0 * pi, 1.0), ModelSpace::hyperbolic_disk(0.8)};
}

Point random_point(const ModelSpace& s, Rng& rng) {
  switch (s.kind()) {
    case SpaceKind::euclidean_box:
      return {rng.uniform(0, s.side()), s.dim() == 1 ? 0.0 : rng.uniform(0, s.side())};
    case SpaceKind::flat_torus:
      return {rng.uniform(0, s.side()), rng.uniform(0, s.side())};
    case SpaceKind::round_sphere:
      return {std::asin(rng.uniform(-1, 1)), rng.uniform(-pi, pi)};
    case SpaceKind::flat_cone:
      return {rng.uniform(0, s.radial_cutoff()), rng.uniform(0, s.total_angle())};
    case SpaceKind::hyperbolic_disk: {
      const double r = s.chart_radius() * std::sqrt(rng.uniform());
      const double a = rng.uniform(0, 2 * pi);
      return {r * std::cos(a), r * std::sin(a)};
    }
  }
  return {};
}

// Torus distance by minimizing over the nine nearest lattice translates.
double torus_translates(const Point& x, const Point& y, double side) {
  double best = INFINITY;
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      best = std::min(best, std::hypot(x.c0 - y.c0 - a * side, x.c1 - y.c1 - b * side));
    }
  }
  return best;
}

// Cone distance by developing the sector into the plane: straight chords for
// each angular gap not exceeding pi, otherwise the route through the apex.
double cone_developed(const Point& x, const Point& y, double total) {
  const double raw = std::abs(x.c1 - y.c1);
  double best = x.c0 + y.c0;
  for (double gap : {raw, total - raw}) {
    if (gap < 0 || gap > pi) continue;
    const double px = x.c0, py = 0.0;
    const double qx = y.c0 * std::cos(gap), qy = y.c0 * std::sin(gap);
    best = std::min(best, std::hypot(px - qx, py - qy));
  }
  return best;
}

using Vec = std::array<double, 3>;
Vec unit(double lat, double lon) {
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

}  // namespace

TEST_CASE("distance examples") {
  CHECK(ModelSpace::euclidean_box(10.0).distance({0, 0}, {3, 4}) == doctest::Approx(5.0).epsilon(1e-15));
  const auto torus = ModelSpace::flat_torus(1.0);
  CHECK(torus.distance({0.1, 0}, {0.9, 0}) ==
        doctest::Approx(torus_translates({0.1, 0}, {0.9, 0}, 1.0)).epsilon(1e-14));
  CHECK(torus_translates({0.1, 0}, {0.9, 0}, 1.0) == doctest::Approx(0.2).epsilon(1e-14));
  const auto cone = ModelSpace::flat_cone(3 * pi, 1.0);
  CHECK(cone.distance({1, 0}, {1, 1.5 * pi}) ==
        doctest::Approx(cone_developed({1, 0}, {1, 1.5 * pi}, 3 * pi)).epsilon(1e-14));
  CHECK(cone_developed({1, 0}, {1, 1.5 * pi}, 3 * pi) == doctest::Approx(2.0));
}

TEST_CASE("distance agrees with independent constructions") {
  Rng rng(11);
  const auto torus = ModelSpace::flat_torus(1.0);
  const auto cone = ModelSpace::flat_cone(1.5 * pi, 1.0);
  const auto wide = ModelSpace::flat_cone(3 * pi, 1.0);
  for (int k = 0; k < 500; ++k) {
    const Point a = random_point(torus, rng), b = random_point(torus, rng);
    CHECK(std::abs(torus.distance(a, b) - torus_translates(a, b, 1.0)) < 1e-14);
    const Point c = random_point(cone, rng), d = random_point(cone, rng);
    CHECK(std::abs(cone.distance(c, d) - cone_developed(c, d, 1.5 * pi)) < 1e-13);
    const Point e = random_point(wide, rng), f = random_point(wide, rng);
    CHECK(std::abs(wide.distance(e, f) - cone_developed(e, f, 3 * pi)) < 1e-13);
  }
}

TEST_CASE("geodesic examples") {
  for (const auto& s : all_spaces()) {
    Rng rng(3);
    const Point x = random_point(s, rng), y = random_point(s, rng);
    CHECK(s.geodesic_point(x, y, 0.0) == x);
    CHECK(s.geodesic_point(x, y, 1.0) == y);
  }
  const Point mid = ModelSpace::euclidean_box(2.0).geodesic_point({0, 0}, {2, 0}, 0.25);
  CHECK(mid.c0 == doctest::Approx(0.5));
  CHECK(mid.c1 == 0.0);
}

TEST_CASE("sphere midpoint matches stepwise great-circle rotation") {
  const auto sphere = ModelSpace::round_sphere(1.0);
  const Point got = sphere.geodesic_point({pi / 2, 0}, {0, 0}, 0.5);
  // Rotate the start vector about the normal of the great circle in small
  // increments until half the arc has been covered.
  const Vec u = unit(pi / 2, 0), v = unit(0, 0);
  Vec axis = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  for (double& c : axis) c /= an;
  Vec p = u;
  const int steps = 100000;
  const double h = (pi / 4) / steps;
  for (int k = 0; k < steps; ++k) {
    const Vec w = {axis[1] * p[2] - axis[2] * p[1], axis[2] * p[0] - axis[0] * p[2],
                   axis[0] * p[1] - axis[1] * p[0]};
    for (int i = 0; i < 3; ++i) p[i] += h * w[i];
    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    for (double& c : p) c /= n;
  }
  const double lat = std::atan2(p[2], std::hypot(p[0], p[1]));
  const double lon = std::atan2(p[1], p[0]);
  CHECK(got.c0 == doctest::Approx(lat).epsilon(1e-4));
  CHECK(got.c1 == doctest::Approx(lon).epsilon(1e-4));
  CHECK(got.c0 == doctest::Approx(pi / 4).epsilon(1e-12));
  CHECK(std::abs(got.c1) < 1e-12);
}

TEST_CASE("metric axioms on samples") {
  for (const auto& s : all_spaces()) {
    CAPTURE(s.name());
    const auto sampled = SampledSpace::sample(s, 8);
    const auto n = sampled->size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& x = sampled->node(i);
      CHECK(s.distance(x, x) == 0.0);
      for (std::size_t j = 0; j < n; j += 3) {
        const Point& y = sampled->node(j);
        CHECK(s.distance(x, y) == s.distance(y, x));
        for (std::size_t k = 0; k < n; k += 5) {
          const Point& z = sampled->node(k);
          CHECK(s.distance(x, z) <= s.distance(x, y) + s.distance(y, z) + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("geodesic consistency and midpoint property") {
  for (const auto& s : all_spaces()) {
    CAPTURE(s.name());
    Rng rng(17);
    for (int k = 0; k < 300; ++k) {
      const Point x = random_point(s, rng), y = random_point(s, rng);
      const double d = s.distance(x, y);
      double t1 = rng.uniform(), t2 = rng.uniform();
      if (t1 > t2) std::swap(t1, t2);
      const Point a = s.geodesic_point(x, y, t1);
      const Point b = s.geodesic_point(x, y, t2);
      CHECK(s.distance(a, b) == doctest::Approx((t2 - t1) * d).epsilon(1e-9).scale(1e-12));
      CHECK(s.distance(x, a) == doctest::Approx(t1 * d).epsilon(1e-9).scale(1e-12));
      CHECK(s.distance(a, y) == doctest::Approx((1 - t1) * d).epsilon(1e-9).scale(1e-12));
      const Point m = s.geodesic_point(x, y, 0.5);
      CHECK(s.distance(x, m) == doctest::Approx(s.distance(m, y)).epsilon(1e-9).scale(1e-12));
    }
  }
}

TEST_CASE("tie-breaks are deterministic and minimizing") {
  const auto sphere = ModelSpace::round_sphere(1.0);
  const Point m = sphere.geodesic_point({0, 0}, {0, -pi}, 0.5);
  CHECK(m.c0 == doctest::Approx(-pi / 2));
  const Point from_pole = sphere.geodesic_point({pi / 2, 0.3}, {-pi / 2, 0}, 0.5);
  CHECK(from_pole.c0 == doctest::Approx(0.0).scale(1e-12));
  CHECK(from_pole.c1 == doctest::Approx(0.3));

  const auto cone = ModelSpace::flat_cone(2.0 * pi, 1.0);
  const Point c = cone.geodesic_point({1, 1.0}, {1, 1.0 + pi}, 0.25);
  CHECK(cone.distance({1, 1.0}, c) == doctest::Approx(0.5));
  CHECK(c.c1 < 1.0);

  const auto wide = ModelSpace::flat_cone(3 * pi, 1.0);
  const Point apex = wide.geodesic_point({1, 0}, {1, 1.5 * pi}, 0.5);
  CHECK(apex.c0 == doctest::Approx(0.0).scale(1e-15));

  const auto torus = ModelSpace::flat_torus(1.0);
  const Point t = torus.geodesic_point({0.0, 0.0}, {0.5, 0.0}, 0.5);
  CHECK(t.c0 == doctest::Approx(0.75));
}

TEST_CASE("sampling volumes") {
  const auto box = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 4);
  CHECK(box->size() == 16);
  for (double v : box->cell_volumes()) CHECK(v == doctest::Approx(1.0 / 16));

  for (int res : {3, 16, 64}) {
    CHECK(SampledSpace::sample(ModelSpace::round_sphere(1.0), res)->total_volume() ==
          doctest::Approx(4 * pi).epsilon(1e-6));
    CHECK(SampledSpace::sample(ModelSpace::flat_cone(pi, 1.0), res)->total_volume() ==
          doctest::Approx(pi / 2).epsilon(1e-6));
  }
  for (const auto& s : all_spaces()) {
    CAPTURE(s.name());
    const auto sampled = SampledSpace::sample(s, 32);
    CHECK(sampled->size() == (s.dim() == 1 ? 32u : 32u * 32u));
    for (double v : sampled->cell_volumes()) CHECK(v > 0.0);
    CHECK(sampled->total_volume() == doctest::Approx(s.analytic_volume()).epsilon(1e-6));
  }
}

TEST_CASE("volume error does not grow under refinement") {
  for (const auto& s : {ModelSpace::round_sphere(1.0), ModelSpace::flat_cone(1.5 * pi, 1.0)}) {
    double previous = INFINITY;
    for (int res : {8, 16, 32, 64}) {
      const double err = std::abs(SampledSpace::sample(s, res)->total_volume() - s.analytic_volume());
      CHECK(err <= std::max(previous / 2, 1e-12));
      previous = err;
    }
  }
}

TEST_CASE("snap returns nearest node with lowest-index ties") {
  for (const auto& s : all_spaces()) {
    CAPTURE(s.name());
    const auto sampled = SampledSpace::sample(s, 12);
    for (std::size_t i = 0; i < sampled->size(); ++i) CHECK(sampled->snap(sampled->node(i)) == i);
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
      const Point p = random_point(s, rng);
      const std::size_t got = sampled->snap(p);
      double best = INFINITY;
      for (std::size_t i = 0; i < sampled->size(); ++i) best = std::min(best, s.distance(p, sampled->node(i)));
      CHECK(s.distance(p, sampled->node(got)) <= best + 1e-12);
    }
  }
  const auto line = SampledSpace::sample(ModelSpace::euclidean_box(1.0, 1), 4);
  CHECK(line->snap({0.5, 0.0}) == 1);
}

TEST_CASE("candidate runs cover the metric ball") {
  for (const auto& s : all_spaces()) {
    CAPTURE(s.name());
    const auto sampled = SampledSpace::sample(s, 20);
    Rng rng(23);
    for (int k = 0; k < 60; ++k) {
      const Point x = random_point(s, rng);
      const double radius = rng.uniform(0.0, 1.5);
      std::set<std::size_t> covered;
      for (const auto& run : sampled->candidate_runs(x, radius)) {
        CHECK(run.col_begin <= run.col_end);
        for (int c = run.col_begin; c <= run.col_end; ++c) covered.insert(sampled->index(run.row, c));
      }
      for (std::size_t i = 0; i < sampled->size(); ++i) {
        if (s.distance(x, sampled->node(i)) <= radius) CHECK(covered.count(i) == 1);
      }
    }
  }
}

TEST_CASE("domain and precondition errors") {
  CHECK_THROWS_AS(ModelSpace::euclidean_box(1.0).distance({2, 0}, {0, 0}), DomainError);
  CHECK_THROWS_AS(ModelSpace::hyperbolic_disk(0.8).distance({1.0, 0}, {0, 0}), DomainError);
  CHECK_THROWS_AS(ModelSpace::flat_cone(pi, 1.0).distance({-0.5, 0}, {0, 0}), DomainError);
  CHECK_THROWS_AS(SampledSpace::sample(ModelSpace::round_sphere(1.0), 1), PreconditionError);
  CHECK_THROWS_AS(ModelSpace::hyperbolic_disk(1.0), DomainError);
}

TEST_CASE("sampled space csv") {
  std::ostringstream out;
  write_sampled_space_csv(out, *SampledSpace::sample(ModelSpace::euclidean_box(1.0), 2));
  CHECK(out.str() == "node,c0,c1,cell_volume\n0,0.25,0.25,0.25\n1,0.25,0.75,0.25\n"
                     "2,0.75,0.25,0.25\n3,0.75,0.75,0.25\n");
}
