#include <cmath>
#include <sstream>

#include "cdlab/errors.hpp"
#include "cdlab/functionals.hpp"
#include "cdlab/interpolation.hpp"
#include "doctest.h"

using namespace cdlab;

namespace {

TrialPipeline box_pipeline(int resolution, std::size_t index) {
  const auto space = ModelSpace::euclidean_box(1.0);
  return build_pipeline(draw_trial(space, 7, index), SampledSpace::sample(space, resolution));
}

// W2 between two snapped interpolants, through the exact solver.
double w2_between(const DynamicalCoupling& c, double s, double t) {
  return w2_distance(solve_exact(evaluate(c, s).measure, evaluate(c, t).measure));
}

}  // namespace

TEST_CASE("ray masses must sum to one") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(1.0), 4);
  CHECK_THROWS_AS(DynamicalCoupling(s, {{0, 1, 0.5}}), PreconditionError);
  CHECK_THROWS_AS(DynamicalCoupling(s, {{0, 99, 1.0}}), PreconditionError);
  CHECK_NOTHROW(DynamicalCoupling(s, {{0, 1, 0.5}, {2, 3, 0.5}}));
}

TEST_CASE("interpolant endpoints are the marginals") {
  const auto p = box_pipeline(16, 0);
  const auto start = evaluate(p.coupling, 0.0).measure;
  const auto end = evaluate(p.coupling, 1.0).measure;
  for (std::size_t i = 0; i < start.space().size(); ++i) {
    CHECK(start.weight(i) == doctest::Approx(p.mu0.weight(i)).epsilon(1e-12));
    CHECK(end.weight(i) == doctest::Approx(p.mu1.weight(i)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(evaluate(p.coupling, 1.5), DomainError);
}

TEST_CASE("density of a uniform measure is one over the support volume") {
  const auto s = SampledSpace::sample(ModelSpace::round_sphere(1.0), 12);
  const auto mu = DiscreteMeasure::uniform_on(s, [](const Point& p) { return p.c0 > 0.3; });
  double volume = 0.0;
  for (auto i : mu.support()) volume += s->cell_volume(i);
  const auto field = density(mu);
  for (auto i : mu.support()) CHECK(field.rho[i] == doctest::Approx(1.0 / volume).epsilon(1e-12));
}

TEST_CASE("snapped ray densities read the interpolant density") {
  const auto p = box_pipeline(24, 1);
  const double t = 0.4;
  const auto field = density(evaluate(p.coupling, t).measure);
  const auto r = ray_densities(p.coupling, t, DensityMode::snapped);
  for (std::size_t k = 0; k < r.size(); ++k) {
    CHECK(r[k] == field.rho[p.coupling.space().snap(p.coupling.position(p.coupling.rays()[k], t))]);
  }
}

TEST_CASE("jacobian densities are exact for a translation") {
  const auto space = ModelSpace::flat_torus(1.0);
  const auto s = SampledSpace::sample(space, 32);
  const auto mu0 = DiscreteMeasure::uniform_on(s, [](const Point& p) { return p.c0 < 0.25 && p.c1 < 0.25; });
  const auto mu1 = DiscreteMeasure::uniform_on(
      s, [](const Point& p) { return p.c0 > 0.25 && p.c0 < 0.5 && p.c1 > 0.125 && p.c1 < 0.375; });
  const auto c = dynamical_coupling(solve_exact(mu0, mu1));
  const double rho = 1.0 / (0.25 * 0.25);
  for (double t : {0.0, 0.3, 0.7, 1.0}) {
    for (double r : ray_densities(c, t, DensityMode::jacobian)) CHECK(r == doctest::Approx(rho).epsilon(1e-9));
  }
}

TEST_CASE("density ratio bounds on a random box transport") {
  const auto p = box_pipeline(64, 3);
  for (auto [t0, t1] : {std::pair{0.25, 0.5}, std::pair{0.5, 0.75}}) {
    const auto r = density_ratio_check(p.coupling, t0, t1, 2);
    CHECK(r.lower_bound == doctest::Approx(std::pow((1.0 - t1) / (1.0 - t0), 2)));
    CHECK(r.upper_bound == doctest::Approx(std::pow(t1 / t0, 2)));
    CHECK(r.violating_mass_fraction <= 0.01);
  }
  CHECK_THROWS_AS(density_ratio_check(p.coupling, 0.5, 0.25, 2), PreconditionError);
}

TEST_CASE("interpolant speed is constant up to a shrinking error") {
  double previous = 1e9;
  for (int res : {16, 32}) {
    const auto p = box_pipeline(res, 2);
    const double w = w2_distance(p.plan);
    double worst = 0.0;
    for (auto [s, t] : {std::pair{0.0, 0.5}, std::pair{0.25, 0.75}, std::pair{0.5, 1.0}}) {
      worst = std::max(worst, std::abs(w2_between(p.coupling, s, t) - (t - s) * w));
    }
    CHECK(worst < previous);
    CHECK(worst <= 2.0 * p.mu0.space().grid_step());
    previous = worst;
  }
}

TEST_CASE("interpolant csv") {
  const auto s = SampledSpace::sample(ModelSpace::euclidean_box(2.0), 2);
  const DynamicalCoupling c(s, {{0, 1, 1.0}});
  std::ostringstream out;
  write_interpolant_csv(out, evaluate(c, 0.25));
  CHECK(out.str() == "t,node,mass,rho\n0.25,0,1,1\n");
}
