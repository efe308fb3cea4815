#include "cdlab/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "cdlab/errors.hpp"
#include "format.hpp"

namespace cdlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
// Quadrant rings at node offsets 1..kStencilReach; averaging over several
// rings damps the jitter of the barycentric node map.
constexpr int kStencilReach = 4;

// Triangle area from side lengths (Kahan's ordering, stable for slivers).
double heron(double a, double b, double c) {
  if (a < b) std::swap(a, b);
  if (a < c) std::swap(a, c);
  if (b < c) std::swap(b, c);
  const double p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
  return p > 0.0 ? 0.25 * std::sqrt(p) : 0.0;
}

}  // namespace

DynamicalCoupling::DynamicalCoupling(SampledSpacePtr space, std::vector<Ray> rays)
    : space_(std::move(space)), rays_(std::move(rays)) {
  if (!space_) throw PreconditionError("dynamical coupling: missing sampled space");
  const SampledSpace& s = *space_;
  long double total = 0.0L;
  for (const auto& r : rays_) {
    if (r.source >= s.size() || r.target >= s.size()) {
      throw PreconditionError("dynamical coupling: ray endpoint out of range");
    }
    if (!(r.mass >= 0.0)) throw PreconditionError("dynamical coupling: negative ray mass");
    total += r.mass;
  }
  if (std::abs(static_cast<double>(total - 1.0L)) > 1e-12) {
    throw PreconditionError("dynamical coupling: ray masses sum to " +
                            format_double(static_cast<double>(total)));
  }

  std::vector<std::size_t> local(s.size(), kNone);
  for (const auto& r : rays_) local[r.source] = 0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    if (local[n] != kNone) {
      local[n] = source_nodes_.size();
      source_nodes_.push_back(n);
    }
  }
  const std::size_t n_src = source_nodes_.size();
  source_mass_.assign(n_src, 0.0);
  barycentre_.resize(n_src);
  std::vector<double> seen(n_src, 0.0);
  ray_source_.reserve(rays_.size());
  const ModelSpace& space_model = s.space();
  for (const auto& r : rays_) {
    const std::size_t i = local[r.source];
    ray_source_.push_back(i);
    source_mass_[i] += r.mass;
    if (r.mass <= 0.0) continue;
    const Point& y = s.node(r.target);
    seen[i] += r.mass;
    barycentre_[i] = seen[i] == r.mass ? y : space_model.geodesic_point(barycentre_[i], y, r.mass / seen[i]);
  }
  for (std::size_t i = 0; i < n_src; ++i) {
    if (seen[i] == 0.0) barycentre_[i] = s.node(source_nodes_[i]);
  }

  stencil_.resize(n_src);
  auto local_neighbor = [&](std::size_t node, int dr, int dc) {
    const auto nb = s.neighbor(node, dr, dc);
    return nb ? local[*nb] : kNone;
  };
  for (std::size_t i = 0; i < n_src; ++i) {
    const std::size_t node = source_nodes_[i];
    if (s.cols() == 1) {
      for (int dr : {-1, 1}) {
        const std::size_t a = local_neighbor(node, dr, 0);
        if (a != kNone) stencil_[i].emplace_back(a, a);
      }
      continue;
    }
    for (int k = 1; k <= kStencilReach; ++k) {
      const std::size_t ring[4] = {local_neighbor(node, k, 0), local_neighbor(node, 0, k),
                                   local_neighbor(node, -k, 0), local_neighbor(node, 0, -k)};
      for (int q = 0; q < 4; ++q) {
        const std::size_t a = ring[q];
        const std::size_t b = ring[(q + 1) % 4];
        if (a != kNone && b != kNone && a != i && b != i && a != b) stencil_[i].emplace_back(a, b);
      }
    }
  }

  reference_extent_.assign(n_src, 0.0);
  std::vector<Point> at_start(n_src);
  for (std::size_t i = 0; i < n_src; ++i) at_start[i] = s.node(source_nodes_[i]);
  for (std::size_t i = 0; i < n_src; ++i) {
    double extent = 0.0;
    for (const auto& [a, b] : stencil_[i]) {
      if (a == b) {
        extent += space_model.distance(at_start[i], at_start[a]);
      } else {
        extent += heron(space_model.distance(at_start[i], at_start[a]),
                        space_model.distance(at_start[i], at_start[b]),
                        space_model.distance(at_start[a], at_start[b]));
      }
    }
    reference_extent_[i] = extent;
  }
}

Point DynamicalCoupling::position(const Ray& ray, double t) const {
  return space_->space().geodesic_point(space_->node(ray.source), space_->node(ray.target), t);
}

std::vector<Point> DynamicalCoupling::source_images(double t) const {
  std::vector<Point> images(source_nodes_.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i] = space_->space().geodesic_point(space_->node(source_nodes_[i]), barycentre_[i], t);
  }
  return images;
}

std::vector<double> DynamicalCoupling::transported_volumes(double t) const {
  const ModelSpace& m = space_->space();
  const std::vector<Point> images = source_images(t);
  std::vector<double> volumes(source_nodes_.size());
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    const double v = space_->cell_volume(source_nodes_[i]);
    if (reference_extent_[i] <= 0.0) {
      volumes[i] = v;
      continue;
    }
    double extent = 0.0;
    for (const auto& [a, b] : stencil_[i]) {
      if (a == b) {
        extent += m.distance(images[i], images[a]);
      } else {
        extent += heron(m.distance(images[i], images[a]), m.distance(images[i], images[b]),
                        m.distance(images[a], images[b]));
      }
    }
    volumes[i] = v * extent / reference_extent_[i];
  }
  return volumes;
}

DynamicalCoupling dynamical_coupling(const TransportPlan& plan) {
  std::vector<Ray> rays;
  rays.reserve(plan.couplings.size());
  for (const auto& c : plan.couplings) rays.push_back({c.source, c.target, c.mass});
  return {plan.space, std::move(rays)};
}

InterpolantMeasure evaluate(const DynamicalCoupling& coupling, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("evaluate: t must lie in [0, 1]");
  const SampledSpace& s = coupling.space();
  std::vector<double> w(s.size(), 0.0);
  for (const auto& r : coupling.rays()) w[s.snap(coupling.position(r, t))] += r.mass;
  return {DiscreteMeasure(coupling.space_ptr(), std::move(w)), t};
}

DensityField density(const DiscreteMeasure& mu) {
  const SampledSpace& s = mu.space();
  DensityField field{mu.space_ptr(), std::vector<double>(s.size(), 0.0)};
  for (auto i : mu.support()) {
    const double v = s.cell_volume(i);
    if (!(v > 0.0)) throw SingularityError("density: mass on zero-volume cell " + std::to_string(i));
    field.rho[i] = mu.weight(i) / v;
  }
  return field;
}

std::vector<double> ray_densities(const DynamicalCoupling& coupling, double t, DensityMode mode) {
  const auto& rays = coupling.rays();
  std::vector<double> r(rays.size());
  if (mode == DensityMode::snapped) {
    const auto mu_t = evaluate(coupling, t);
    const auto field = density(mu_t.measure);
    for (std::size_t k = 0; k < rays.size(); ++k) {
      r[k] = field.rho[coupling.space().snap(coupling.position(rays[k], t))];
    }
    return r;
  }
  const std::vector<double> volumes = coupling.transported_volumes(t);
  const auto& src = coupling.ray_source();
  for (std::size_t k = 0; k < rays.size(); ++k) {
    const double v = volumes[src[k]];
    r[k] = v > 0.0 ? coupling.source_mass()[src[k]] / v : kInf;
  }
  return r;
}

RatioReport density_ratio_check(const DynamicalCoupling& coupling, double t0, double t1, int m,
                                const RatioOptions& options) {
  if (!(0.0 < t0 && t0 < t1 && t1 < 1.0)) {
    throw PreconditionError("density_ratio_check: need 0 < t0 < t1 < 1");
  }
  if (m < 1) throw PreconditionError("density_ratio_check: m must be at least 1");
  RatioReport report;
  report.t0 = t0;
  report.t1 = t1;
  report.m = m;
  report.lower_bound = std::pow((1.0 - t1) / (1.0 - t0), m);
  report.upper_bound = std::pow(t1 / t0, m);
  report.min_ratio = kInf;
  report.max_ratio = -kInf;

  const auto r0 = ray_densities(coupling, t0, options.mode);
  const auto r1 = ray_densities(coupling, t1, options.mode);
  const double lo = report.lower_bound * (1.0 - options.tolerance);
  const double hi = report.upper_bound * (1.0 + options.tolerance);
  double violating = 0.0;
  double worst_excess = 0.0;
  const auto& rays = coupling.rays();
  for (std::size_t k = 0; k < rays.size(); ++k) {
    const bool usable = r0[k] > 0.0 && std::isfinite(r0[k]) && r1[k] > 0.0 && std::isfinite(r1[k]);
    if (rays[k].mass < options.mass_floor || !usable) {
      ++report.excluded_rays;
      continue;
    }
    const double ratio = r1[k] / r0[k];
    report.min_ratio = std::min(report.min_ratio, ratio);
    report.max_ratio = std::max(report.max_ratio, ratio);
    report.checked_mass += rays[k].mass;
    if (ratio < lo || ratio > hi) {
      violating += rays[k].mass;
      const double excess = std::max(lo / ratio, ratio / hi);
      if (excess > worst_excess) {
        worst_excess = excess;
        report.worst_ray = k;
      }
    }
  }
  report.violating_mass_fraction = report.checked_mass > 0.0 ? violating / report.checked_mass : 0.0;
  return report;
}

void write_interpolant_csv(std::ostream& out, const InterpolantMeasure& mu_t) {
  const auto field = density(mu_t.measure);
  out << "t,node,mass,rho\n";
  for (auto i : mu_t.measure.support()) {
    out << format_double(mu_t.t) << ',' << i << ',' << format_double(mu_t.measure.weight(i)) << ','
        << format_double(field.rho[i]) << '\n';
  }
}

}  // namespace cdlab
