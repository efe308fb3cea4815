#include "cdlab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cdlab/errors.hpp"
#include "cdlab/random.hpp"
#include "format.hpp"

namespace cdlab {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_offset(double value, double lo, double period) {
  double d = std::fmod(value - lo, period);
  if (d < 0.0) d += period;
  return d;
}

bool in_window(double value, double lo, double width, double period) {
  if (period > 0.0) return wrap_offset(value, lo, period) <= width;
  return value >= lo && value <= lo + width;
}

Point random_sphere_point(Rng& rng) { return {std::asin(rng.uniform(-1.0, 1.0)), rng.uniform(-kPi, kPi)}; }

}  // namespace

double renyi_functional(const DiscreteMeasure& mu, int m) {
  if (m < 1) throw PreconditionError("renyi_functional: m must be at least 1");
  const auto field = density(mu);
  long double total = 0.0L;
  for (auto i : mu.support()) total += mu.weight(i) * std::pow(field.rho[i], -1.0 / m);
  return static_cast<double>(total);
}

std::vector<double> uniform_t_grid(int points) {
  if (points < 2) throw PreconditionError("uniform_t_grid: need at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return grid;
}

ConcavityReport theta_profile(const DynamicalCoupling& coupling, int m, const std::vector<double>& t_grid,
                              DensityMode mode) {
  if (m < 1) throw PreconditionError("theta_profile: m must be at least 1");
  ConcavityReport report;
  report.t_grid = t_grid;
  report.resolution = coupling.space().resolution();
  const auto& rays = coupling.rays();
  for (double t : t_grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("theta_profile: t outside [0, 1]");
    try {
      const auto r = ray_densities(coupling, t, mode);
      long double total = 0.0L;
      for (std::size_t k = 0; k < rays.size(); ++k) {
        if (std::isinf(r[k])) continue;
        total += rays[k].mass * std::pow(r[k], -1.0 / m);
      }
      report.theta.push_back(static_cast<double>(total));
    } catch (const Error& e) {
      report.theta.push_back(std::numeric_limits<double>::quiet_NaN());
      report.errors.push_back("t=" + format_double(t) + ": " + e.what());
    }
  }
  report.max_midpoint_deficit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < report.theta.size(); ++i) {
    const double d = 0.5 * (report.theta[i - 1] + report.theta[i + 1]) - report.theta[i];
    if (d > report.max_midpoint_deficit || std::isnan(d)) {
      report.max_midpoint_deficit = d;
      report.worst_index = i;
      if (std::isnan(d)) break;
    }
  }
  if (report.theta.size() < 3) report.max_midpoint_deficit = 0.0;
  return report;
}

bool concavity_check(ConcavityReport& report, double tol) {
  const auto& g = report.t_grid;
  if (g.size() < 3) throw PreconditionError("concavity_check: need at least 3 grid points");
  const double step = (g.back() - g.front()) / static_cast<double>(g.size() - 1);
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (std::abs((g[i] - g[i - 1]) - step) > 1e-9 * std::max(1.0, std::abs(step))) {
      throw PreconditionError("concavity_check: t grid is not uniform");
    }
  }
  report.tolerance = tol;
  report.verdict = report.errors.empty() && report.max_midpoint_deficit <= tol;
  return *report.verdict;
}

// ---------------------------------------------------------------------------
// Regions and trials

bool region_contains(const ModelSpace& space, const Region& region, const Point& p) {
  if (region.shape == Region::Shape::ball) return space.distance(region.centre, p) <= region.radius;
  switch (space.kind()) {
    case SpaceKind::euclidean_box:
      return in_window(p.c0, region.lo0, region.width0, 0.0) &&
             (space.dim() == 1 || in_window(p.c1, region.lo1, region.width1, 0.0));
    case SpaceKind::flat_torus:
      return in_window(p.c0, region.lo0, region.width0, space.side()) &&
             in_window(p.c1, region.lo1, region.width1, space.side());
    case SpaceKind::round_sphere:
      return in_window(p.c0, region.lo0, region.width0, 0.0) &&
             in_window(p.c1, region.lo1, region.width1, 2.0 * kPi);
    case SpaceKind::flat_cone:
      return in_window(p.c0, region.lo0, region.width0, 0.0) &&
             in_window(p.c1, region.lo1, region.width1, space.total_angle());
    case SpaceKind::hyperbolic_disk:
      return in_window(std::hypot(p.c0, p.c1), region.lo0, region.width0, 0.0) &&
             in_window(std::atan2(p.c1, p.c0), region.lo1, region.width1, 2.0 * kPi);
  }
  return false;
}

std::string describe(const Region& region) {
  std::ostringstream out;
  if (region.shape == Region::Shape::ball) {
    out << "ball(centre=(" << format_double(region.centre.c0) << "," << format_double(region.centre.c1)
        << "),radius=" << format_double(region.radius) << ")";
  } else {
    out << "window(c0=[" << format_double(region.lo0) << "+" << format_double(region.width0) << "],c1=["
        << format_double(region.lo1) << "+" << format_double(region.width1) << "])";
  }
  return out.str();
}

TrialSpec draw_trial(const ModelSpace& space, std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, index));
  TrialSpec spec;
  spec.seed = seed;
  spec.index = index;
  spec.family = "random";
  Region& a = spec.source;
  Region& b = spec.target;
  switch (space.kind()) {
    case SpaceKind::euclidean_box: {
      const double s = space.side();
      for (Region* r : {&a, &b}) {
        r->width0 = rng.uniform(0.15, 0.4) * s;
        r->lo0 = rng.uniform(0.0, s - r->width0);
        if (space.dim() == 2) {
          r->width1 = rng.uniform(0.15, 0.4) * s;
          r->lo1 = rng.uniform(0.0, s - r->width1);
        }
      }
      break;
    }
    case SpaceKind::flat_torus: {
      const double s = space.side();
      a.width0 = rng.uniform(0.1, 0.3) * s;
      a.width1 = rng.uniform(0.1, 0.3) * s;
      a.lo0 = rng.uniform(0.0, s);
      a.lo1 = rng.uniform(0.0, s);
      b.width0 = rng.uniform(0.1, 0.3) * s;
      b.width1 = rng.uniform(0.1, 0.3) * s;
      const double off0 = rng.uniform(-0.2, 0.2) * s;
      const double off1 = rng.uniform(-0.2, 0.2) * s;
      b.lo0 = wrap_offset(a.lo0 + 0.5 * a.width0 + off0 - 0.5 * b.width0, 0.0, s);
      b.lo1 = wrap_offset(a.lo1 + 0.5 * a.width1 + off1 - 0.5 * b.width1, 0.0, s);
      break;
    }
    case SpaceKind::round_sphere: {
      const double R = space.radius();
      a.shape = b.shape = Region::Shape::ball;
      a.centre = random_sphere_point(rng);
      do {
        b.centre = random_sphere_point(rng);
      } while (space.distance(a.centre, b.centre) > 1.2 * R);
      a.radius = rng.uniform(0.4, 0.9) * R;
      b.radius = rng.uniform(0.4, 0.9) * R;
      break;
    }
    case SpaceKind::flat_cone: {
      const double cut = space.radial_cutoff();
      const double theta = space.total_angle();
      for (Region* r : {&a, &b}) {
        r->lo0 = rng.uniform(0.15, 0.45) * cut;
        r->width0 = rng.uniform(0.25, 0.45) * cut;
        r->width1 = rng.uniform(0.5, 1.2);
      }
      a.lo1 = rng.uniform(0.0, theta);
      const double shift = rng.uniform(-1.0, 1.0);
      b.lo1 = wrap_offset(a.lo1 + 0.5 * a.width1 + shift - 0.5 * b.width1, 0.0, theta);
      break;
    }
    case SpaceKind::hyperbolic_disk: {
      a.shape = b.shape = Region::Shape::ball;
      for (Region* r : {&a, &b}) {
        const double rad = 0.5 * std::sqrt(rng.uniform());
        const double ang = rng.uniform(0.0, 2.0 * kPi);
        r->centre = {rad * std::cos(ang), rad * std::sin(ang)};
        r->radius = rng.uniform(0.3, 0.8);
      }
      break;
    }
  }
  return spec;
}

TrialSpec draw_directed_trial(const ModelSpace& space, std::uint64_t seed, std::size_t index) {
  if (space.kind() != SpaceKind::hyperbolic_disk) {
    throw PreconditionError("draw_directed_trial: only defined on hyperbolic_disk");
  }
  Rng rng(derive_seed(seed ^ 0xa5a5a5a5ULL, index));
  TrialSpec spec;
  spec.seed = seed;
  spec.index = index;
  spec.family = "directed";
  const double beta = rng.uniform(0.0, 2.0 * kPi);
  const double chart = space.chart_radius();
  double centre_angle = beta;
  for (Region* r : {&spec.source, &spec.target}) {
    const double rc = rng.uniform(0.5, 0.7) * chart / 0.8;
    r->width0 = rng.uniform(0.04, 0.1) * chart / 0.8;
    r->lo0 = rc - 0.5 * r->width0;
    r->width1 = rng.uniform(0.5, 1.5);
    r->lo1 = wrap_offset(centre_angle - 0.5 * r->width1, 0.0, 2.0 * kPi);
    centre_angle = beta + kPi;
  }
  return spec;
}

TrialPipeline build_pipeline(const TrialSpec& spec, const SampledSpacePtr& sampled) {
  const ModelSpace& space = sampled->space();
  auto mu0 = DiscreteMeasure::uniform_on(sampled, [&](const Point& p) { return region_contains(space, spec.source, p); });
  auto mu1 = spec.family == "identical"
                 ? mu0
                 : DiscreteMeasure::uniform_on(sampled, [&](const Point& p) { return region_contains(space, spec.target, p); });
  auto plan = solve_exact(mu0, mu1);
  auto potentials = dual_potentials(mu0, mu1, plan);
  auto coupling = dynamical_coupling(plan);
  return {std::move(mu0), std::move(mu1), std::move(plan), std::move(potentials), std::move(coupling)};
}

double cd_tolerance(double constant, int resolution) {
  if (resolution < 1) throw PreconditionError("cd_tolerance: resolution must be positive");
  return constant / resolution;
}

CdReport cd_verdict(const ModelSpace& space, int trials, int resolution, std::uint64_t seed,
                    const CdOptions& options) {
  if (trials < 0) throw PreconditionError("cd_verdict: trials must be nonnegative");
  CdReport report;
  report.space = space.name();
  report.m = options.m;
  report.resolution = resolution;
  report.seed = seed;
  report.tolerance = cd_tolerance(options.tol_constant, resolution);
  report.max_deficit = -std::numeric_limits<double>::infinity();
  const auto sampled = SampledSpace::sample(space, resolution);
  const auto grid = uniform_t_grid(options.t_points);

  for (int k = 0; k < trials; ++k) {
    const auto index = static_cast<std::size_t>(k);
    const bool directed = options.directed && k % 2 == 0;
    TrialResult result;
    result.spec = directed ? draw_directed_trial(space, seed, index) : draw_trial(space, seed, index);
    try {
      const auto pipeline = build_pipeline(result.spec, sampled);
      result.dual_gap = pipeline.potentials.gap;
      result.report = theta_profile(pipeline.coupling, options.m, grid, options.mode);
      concavity_check(result.report, report.tolerance);
      if (options.inspect) options.inspect(result.spec, pipeline);
      if (!result.report.errors.empty()) result.error = result.report.errors.front();
    } catch (const Error& e) {
      result.error = e.what();
    }
    if (result.error) {
      report.pass = false;
    } else if (result.report.max_midpoint_deficit > report.max_deficit) {
      report.max_deficit = result.report.max_midpoint_deficit;
      report.worst_trial = index;
    }
    report.trials.push_back(std::move(result));
  }
  if (trials == 0) report.max_deficit = 0.0;
  if (report.max_deficit > report.tolerance) report.pass = false;
  return report;
}

ConcavityReport rerun_trial(const TrialSpec& spec, const ModelSpace& space, int resolution,
                            const CdOptions& options) {
  const auto sampled = SampledSpace::sample(space, resolution);
  const auto pipeline = build_pipeline(spec, sampled);
  auto report = theta_profile(pipeline.coupling, options.m, uniform_t_grid(options.t_points), options.mode);
  concavity_check(report, cd_tolerance(options.tol_constant, resolution));
  return report;
}

RefinementReport refinement_check(const CdReport& report, const ModelSpace& space, int resolution,
                                  std::size_t count, const CdOptions& options) {
  RefinementReport out;
  out.resolution = resolution;
  out.tolerance = cd_tolerance(options.tol_constant, resolution);
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < report.trials.size(); ++k) {
    if (!report.trials[k].error) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.trials[a].report.max_midpoint_deficit > report.trials[b].report.max_midpoint_deficit;
  });
  if (order.size() > count) order.resize(count);
  for (std::size_t k : order) {
    const double coarse = report.trials[k].report.max_midpoint_deficit;
    auto fine = rerun_trial(report.trials[k].spec, space, resolution, options);
    const double value = fine.max_midpoint_deficit;
    out.trials.push_back(k);
    out.coarse.push_back(coarse);
    out.fine.push_back(value);
    if (!(value < coarse)) out.strictly_decreasing = false;
    const bool ok = fine.errors.empty() && (coarse > 0.0 ? value < coarse : value <= out.tolerance);
    if (!ok) out.pass = false;
    out.profiles.push_back(std::move(fine));
  }
  return out;
}

double calibrate_cd_constant(int trials, int resolution, std::uint64_t seed, int m) {
  CdOptions options;
  options.m = m;
  const auto report = cd_verdict(ModelSpace::euclidean_box(1.0), trials, resolution, seed, options);
  return std::max(2.0 * report.max_deficit * resolution, 0.01);
}

void write_theta_csv(std::ostream& out, const ConcavityReport& report) {
  out << "t,theta\n";
  for (std::size_t i = 0; i < report.t_grid.size(); ++i) {
    out << format_double(report.t_grid[i]) << ',' << format_double(report.theta[i]) << '\n';
  }
}

}  // namespace cdlab
