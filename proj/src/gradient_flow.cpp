#include "cdlab/gradient_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "cdlab/errors.hpp"
#include "format.hpp"

namespace cdlab {

namespace {

bool periodic_axis(const ModelSpace& space, int axis) {
  switch (space.kind()) {
    case SpaceKind::flat_torus:
      return true;
    case SpaceKind::round_sphere:
    case SpaceKind::flat_cone:
      return axis == 1;
    default:
      return false;
  }
}

// x + delta along one chart axis, wrapped on periodic axes.
Point shifted(const ModelSpace& space, const Point& x, int axis, double delta) {
  Point p = x;
  (axis == 0 ? p.c0 : p.c1) += delta;
  if (periodic_axis(space, axis)) p = space.canonical(p);
  if (!space.contains(p)) {
    throw DomainError("finite differences: stencil point (" + format_double(p.c0) + ", " + format_double(p.c1) +
                      ") leaves the chart");
  }
  return p;
}

int chart_axes(const ModelSpace& space) { return space.dim() == 1 ? 1 : 2; }

double inverse_metric_component(const ModelSpace& space, const Point& p, int axis) {
  const InverseMetric g = space.inverse_metric(p);
  return axis == 0 ? g.g00 : g.g11;
}

double simpson(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  if (n % 2 == 0) {
    double s = 0.5 * (y.front() + y.back());
    for (std::size_t i = 1; i + 1 < n; ++i) s += y[i];
    return s * h;
  }
  double s = y.front() + y.back();
  for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * y[i];
  return s * h / 3.0;
}

// Euler flow of one point from s to t_end; nullopt when it leaves the chart.
std::optional<Point> flow_point(const FamilyOfFields& family, Point x, double s, double t_end,
                                const FlowOptions& options) {
  if (t_end <= s) return x;
  const int steps = std::max(1, static_cast<int>(std::lround((t_end - s) / options.step)));
  const double dt = (t_end - s) / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = s + k * dt;
    try {
      const auto f = [&](const Point& p) { return family.value(t, p); };
      const ChartVector g = finite_difference_gradient(family.space, f, x, options.fd_step);
      const Point next = family.space.canonical({x.c0 + dt * g.v0, x.c1 + dt * g.v1});
      if (!family.space.contains(next)) return std::nullopt;
      x = next;
    } catch (const DomainError&) {
      return std::nullopt;
    }
  }
  return x;
}

}  // namespace

FamilyOfFields static_family(const ModelSpace& space, PointFunction f, double lambda, double lipschitz) {
  FamilyOfFields family{space, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                        nullptr, nullptr, lipschitz};
  family.value = [f = std::move(f)](double, const Point& p) { return f(p); };
  family.lambda = [lambda](double) { return lambda; };
  return family;
}

FamilyOfFields hj_family(const ScalarField& base, double lipschitz) {
  auto shifts = std::make_shared<const ShiftFamily>(base, std::vector<double>{});
  FamilyOfFields family{base.space().space(), 0.0, 1.0, nullptr, nullptr, lipschitz};
  family.value = [shifts](double t, const Point& p) { return shifts->value_at(t, p); };
  family.lambda = [](double t) { return 1.0 / t; };
  return family;
}

ChartVector finite_difference_gradient(const ModelSpace& space, const PointFunction& f, const Point& x,
                                       double h) {
  if (!(h > 0.0)) throw PreconditionError("finite_difference_gradient: step must be positive");
  space.check_domain(x);
  double d[2] = {0.0, 0.0};
  for (int axis = 0; axis < chart_axes(space); ++axis) {
    const double fp = f(shifted(space, x, axis, h));
    const double fm = f(shifted(space, x, axis, -h));
    d[axis] = inverse_metric_component(space, x, axis) * (fp - fm) / (2.0 * h);
  }
  return {d[0], d[1]};
}

double tangent_norm(const ModelSpace& space, const Point& x, const ChartVector& v) {
  const InverseMetric g = space.inverse_metric(x);
  return std::sqrt(v.v0 * v.v0 / g.g00 + v.v1 * v.v1 / g.g11);
}

double finite_difference_laplacian(const ModelSpace& space, const PointFunction& f, const Point& x, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite_difference_laplacian: step must be positive");
  space.check_domain(x);
  const double centre = f(x);
  double sum = 0.0;
  for (int axis = 0; axis < chart_axes(space); ++axis) {
    const Point plus = shifted(space, x, axis, h);
    const Point minus = shifted(space, x, axis, -h);
    Point half_plus = x;
    Point half_minus = x;
    (axis == 0 ? half_plus.c0 : half_plus.c1) += 0.5 * h;
    (axis == 0 ? half_minus.c0 : half_minus.c1) -= 0.5 * h;
    const double a_plus = space.area_element(half_plus) * inverse_metric_component(space, half_plus, axis);
    const double a_minus = space.area_element(half_minus) * inverse_metric_component(space, half_minus, axis);
    sum += a_plus * (f(plus) - centre) - a_minus * (centre - f(minus));
  }
  return sum / (h * h * space.area_element(x));
}

HessianEstimate finite_difference_hessian(const ModelSpace& space, const PointFunction& f, const Point& x,
                                          double h) {
  if (space.dim() == 1) throw PreconditionError("finite_difference_hessian: needs a 2-D chart");
  const double centre = f(x);
  HessianEstimate est;
  est.h00 = (f(shifted(space, x, 0, h)) - 2.0 * centre + f(shifted(space, x, 0, -h))) / (h * h);
  est.h11 = (f(shifted(space, x, 1, h)) - 2.0 * centre + f(shifted(space, x, 1, -h))) / (h * h);
  const auto corner = [&](double s0, double s1) { return f(shifted(space, shifted(space, x, 0, s0), 1, s1)); };
  est.h01 = (corner(h, h) - corner(h, -h) - corner(-h, h) + corner(-h, -h)) / (4.0 * h * h);
  est.trace = finite_difference_laplacian(space, f, x, h);
  return est;
}

const Point& Curve::at(double t) const {
  if (times.empty()) throw PreconditionError("curve: empty");
  const double pos = step > 0.0 ? (t - times.front()) / step : 0.0;
  const long i = std::lround(pos);
  if (i < 0 || i >= static_cast<long>(times.size()) || std::abs(times[static_cast<std::size_t>(i)] - t) > 0.5 * step + 1e-12) {
    throw PreconditionError("curve: no sample at t = " + format_double(t));
  }
  return points[static_cast<std::size_t>(i)];
}

Curve gradient_curve(const FamilyOfFields& family, const Point& x0, double t0, double t_end,
                     const FlowOptions& options) {
  if (!(family.t_begin < t0 && t0 < t_end && t_end <= family.t_end)) {
    throw PreconditionError("gradient_curve: need t_begin < t0 < t_end <= end of the family interval");
  }
  if (!(options.step > 0.0)) throw PreconditionError("gradient_curve: step must be positive");
  const int steps = std::max(1, static_cast<int>(std::lround((t_end - t0) / options.step)));
  Curve curve;
  curve.step = (t_end - t0) / steps;
  Point x = family.space.canonical(x0);
  family.space.check_domain(x);
  curve.times.push_back(t0);
  curve.points.push_back(x);
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * curve.step;
    const auto f = [&](const Point& p) { return family.value(t, p); };
    ChartVector g;
    try {
      g = finite_difference_gradient(family.space, f, x, options.fd_step);
    } catch (const DomainError&) {
      curve.truncated = true;
      break;
    }
    const Point next = family.space.canonical({x.c0 + curve.step * g.v0, x.c1 + curve.step * g.v1});
    if (!family.space.contains(next)) {
      curve.truncated = true;
      break;
    }
    x = next;
    curve.times.push_back(k + 1 == steps ? t_end : t0 + (k + 1) * curve.step);
    curve.points.push_back(x);
  }
  return curve;
}

Curve ray_curve(const DynamicalCoupling& coupling, std::size_t ray, const std::vector<double>& times) {
  if (ray >= coupling.rays().size()) throw PreconditionError("ray_curve: ray index out of range");
  if (times.empty()) throw PreconditionError("ray_curve: no times");
  Curve curve;
  curve.times = times;
  curve.step = times.size() > 1 ? (times.back() - times.front()) / static_cast<double>(times.size() - 1) : 0.0;
  for (double t : times) curve.points.push_back(coupling.position(coupling.rays()[ray], t));
  return curve;
}

double contraction_bound(const FamilyOfFields& family, double t0, double t1, int panels) {
  if (panels < 2) panels = 2;
  if (panels % 2 == 1) ++panels;
  const double h = (t1 - t0) / panels;
  std::vector<double> y(static_cast<std::size_t>(panels + 1));
  for (int i = 0; i <= panels; ++i) y[static_cast<std::size_t>(i)] = family.lambda(t0 + i * h);
  return std::exp(simpson(y, h));
}

ContractionReport contraction_check(const FamilyOfFields& family, const Curve& a, const Curve& b, double t0,
                                    double t1, double tolerance) {
  if (!(t0 < t1)) throw PreconditionError("contraction_check: need t0 < t1");
  ContractionReport report;
  report.t0 = t0;
  report.t1 = t1;
  report.tolerance = tolerance;
  report.bound = contraction_bound(family, t0, t1);
  report.distance0 = family.space.distance(a.at(t0), b.at(t0));
  report.distance1 = family.space.distance(a.at(t1), b.at(t1));
  report.excess = report.distance1 - report.bound * report.distance0;
  report.pass = report.excess <= tolerance;
  return report;
}

LaplacianReport laplacian_bound_check(const SampledSpace& sampled, const PointFunction& f, double lambda, int m,
                                      const LaplacianOptions& options) {
  const ModelSpace& space = sampled.space();
  if (options.validation_points < 3) throw PreconditionError("laplacian_bound_check: need 3 validation points");
  const auto segments = random_segments(space, options.validation_segments, options.seed);
  const int points = options.validation_points;
  std::vector<double> g(static_cast<std::size_t>(points));
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& [a, b] = segments[k];
    const double length = space.distance(a, b);
    for (int j = 0; j < points; ++j) {
      const double u = static_cast<double>(j) / (points - 1);
      g[static_cast<std::size_t>(j)] = f(space.geodesic_point(a, b, u)) - 0.5 * lambda * u * u * length * length;
    }
    for (std::size_t j = 1; j + 1 < g.size(); ++j) {
      if (g[j - 1] + g[j + 1] - 2.0 * g[j] > options.validation_tolerance) {
        throw PreconditionError("laplacian_bound_check: field is not " + format_double(lambda) +
                                "-concave along segment " + std::to_string(k) + " from (" + format_double(a.c0) +
                                ", " + format_double(a.c1) + ") to (" + format_double(b.c0) + ", " +
                                format_double(b.c1) + ")");
      }
    }
  }

  LaplacianReport report;
  report.lambda = lambda;
  report.m = m;
  report.tolerance = options.constant * sampled.grid_step();
  report.max_laplacian = -std::numeric_limits<double>::infinity();
  report.max_excess = -std::numeric_limits<double>::infinity();
  const double h = sampled.cols() > 1 ? std::min(sampled.row_step(), sampled.col_step()) : sampled.row_step();
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    double lap = 0.0;
    try {
      lap = finite_difference_laplacian(space, f, sampled.node(i), h);
    } catch (const DomainError&) {
      continue;
    }
    ++report.nodes;
    report.max_laplacian = std::max(report.max_laplacian, lap);
    if (lap - m * lambda > report.max_excess) {
      report.max_excess = lap - m * lambda;
      report.worst_node = i;
    }
  }
  report.pass = report.nodes > 0 && report.max_excess <= report.tolerance;
  return report;
}

VolumeEvolutionReport volume_evolution_check(const FamilyOfFields& family, const ChartBox& target,
                                             const ChartBox& seeds, double t0, double t1, int sample_n,
                                             const VolumeEvolutionOptions& options) {
  if (!(t0 < t1)) throw PreconditionError("volume_evolution_check: need t0 < t1");
  if (sample_n < 2) throw PreconditionError("volume_evolution_check: need at least 2 seeds per axis");
  if (options.panels < 2 || options.panels % 2 == 1) {
    throw PreconditionError("volume_evolution_check: panels must be even and positive");
  }
  const ModelSpace& space = family.space;
  const double d0 = (seeds.hi0 - seeds.lo0) / sample_n;
  const double d1 = (seeds.hi1 - seeds.lo1) / sample_n;
  const double dt = (t1 - t0) / options.panels;

  VolumeEvolutionReport report;
  report.tolerance = options.tolerance;
  for (int j = 0; j <= options.panels; ++j) {
    const double s = j == options.panels ? t1 : t0 + j * dt;
    const auto f = [&](const Point& p) { return family.value(s, p); };
    double volume = 0.0;
    double laplacian_mass = 0.0;
    for (int a = 0; a < sample_n; ++a) {
      for (int b = 0; b < sample_n; ++b) {
        const Point x{seeds.lo0 + (a + 0.5) * d0, seeds.lo1 + (b + 0.5) * d1};
        if (!space.contains(x)) continue;
        const auto end = flow_point(family, x, s, t1, options.flow);
        if (!end || !target.contains(*end)) continue;
        if (a == 0 || b == 0 || a + 1 == sample_n || b + 1 == sample_n) report.boundary_flag = true;
        const double cell = d0 * d1 * space.area_element(x);
        volume += cell;
        laplacian_mass += cell * finite_difference_laplacian(space, f, x, options.flow.fd_step);
      }
    }
    report.times.push_back(s);
    report.volume.push_back(volume);
    report.laplacian_mass.push_back(laplacian_mass);
  }
  report.volume_change = report.volume.back() - report.volume.front();
  report.integral = simpson(report.laplacian_mass, dt);
  // One seed cell is the counting resolution; it floors the scale so that two
  // sides which are both zero up to rounding compare equal.
  const double scale = std::max({std::abs(report.volume_change), std::abs(report.integral), d0 * d1});
  report.relative_mismatch = std::abs(report.volume_change - report.integral) / scale;
  report.pass = !report.boundary_flag && report.relative_mismatch <= options.tolerance;
  return report;
}

double smooth_hj_value(const SmoothField& f, double t, const Point& z) {
  if (!(t > 0.0)) throw PreconditionError("smooth_hj_value: time must be positive");
  Point y = z;
  for (int it = 0; it < 100; ++it) {
    const ChartVector g = f.gradient(y);
    const auto h = f.hessian(y);
    const double r0 = g.v0 + (y.c0 - z.c0) / t;
    const double r1 = g.v1 + (y.c1 - z.c1) / t;
    const double a = h[0] + 1.0 / t;
    const double b = h[1];
    const double c = h[2] + 1.0 / t;
    const double det = a * c - b * b;
    if (!(a > 0.0 && det > 0.0)) throw ConvergenceError("smooth_hj_value: inner problem not convex", det);
    const double s0 = (c * r0 - b * r1) / det;
    const double s1 = (a * r1 - b * r0) / det;
    y.c0 -= s0;
    y.c1 -= s1;
    if (std::hypot(s0, s1) <= 1e-15 * (1.0 + std::hypot(y.c0, y.c1))) {
      const double dx = z.c0 - y.c0;
      const double dy = z.c1 - y.c1;
      return f.value(y) + (dx * dx + dy * dy) / (2.0 * t);
    }
  }
  throw ConvergenceError("smooth_hj_value: Newton iteration did not converge", 0.0);
}

double bump(double t, double centre, double half_width) {
  const double x = std::abs(2.0 * (t - centre) / half_width);
  if (x >= 2.0) return 0.0;
  if (x >= 1.0) return (2.0 - x) * (2.0 - x) * (2.0 - x) / 6.0;
  return (4.0 - 6.0 * x * x + 3.0 * x * x * x) / 6.0;
}

double bump_derivative(double t, double centre, double half_width) {
  const double x = 2.0 * (t - centre) / half_width;
  const double ax = std::abs(x);
  double d = 0.0;
  if (ax >= 2.0) return 0.0;
  if (ax >= 1.0) {
    d = -(x > 0.0 ? 1.0 : -1.0) * (2.0 - ax) * (2.0 - ax) / 2.0;
  } else {
    d = (-12.0 * x + 9.0 * x * ax) / 6.0;
  }
  return d * 2.0 / half_width;
}

RiccatiReport riccati_check(const SmoothField& f, const Curve& ray, int m, const RiccatiOptions& options) {
  if (m < 1) throw PreconditionError("riccati_check: m must be at least 1");
  const auto& times = ray.times;
  if (times.size() < 3 || times.size() != ray.points.size()) throw PreconditionError("riccati_check: ray too short");
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - times[k - 1] - dt) > 1e-9 * dt) {
      throw PreconditionError("riccati_check: ray times must be uniformly spaced");
    }
  }
  if (!(times.front() > 0.0 && times.back() < 1.0)) throw PreconditionError("riccati_check: times must lie in (0, 1)");
  for (double c : options.centres) {
    if (c - options.half_width < times.front() - 1e-12 || c + options.half_width > times.back() + 1e-12) {
      throw PreconditionError("riccati_check: bump support not covered by the ray");
    }
  }

  RiccatiReport report;
  report.m = m;
  report.times = times;
  report.tolerance = options.tolerance;
  const double h = options.fd_step;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    const Point& x = ray.points[k];
    const auto ft = [&](double dx, double dy) { return smooth_hj_value(f, t, {x.c0 + dx, x.c1 + dy}); };
    const double centre = ft(0.0, 0.0);
    const double trace = (ft(h, 0.0) - 2.0 * centre + ft(-h, 0.0)) / (h * h) +
                         (ft(0.0, h) - 2.0 * centre + ft(0.0, -h)) / (h * h);
    report.trace.push_back(trace);
  }
  report.min_weak_value = std::numeric_limits<double>::infinity();
  for (double c : options.centres) {
    std::vector<double> integrand(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double hk = report.trace[k];
      integrand[k] = hk * bump_derivative(times[k], c, options.half_width) -
                     hk * hk * bump(times[k], c, options.half_width) / m;
    }
    const double value = simpson(integrand, dt);
    report.weak_values.push_back(value);
    report.min_weak_value = std::min(report.min_weak_value, value);
  }
  report.pass = report.min_weak_value >= -options.tolerance;
  return report;
}

void write_curve_csv(std::ostream& out, const Curve& curve) {
  out << "t,c0,c1\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out << format_double(curve.times[i]) << ',' << format_double(curve.points[i].c0) << ','
        << format_double(curve.points[i].c1) << '\n';
  }
}

}  // namespace cdlab
