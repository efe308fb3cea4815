#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cdlab/transport.hpp"

namespace cdlab {

/// One geodesic of a dynamical coupling, carrying `mass`.
struct Ray {
  std::size_t source;
  std::size_t target;
  double mass;
};

/// Mass-weighted geodesics lifted from an optimal plan.
///
/// Besides the rays it keeps, per source node, the mass-weighted geodesic
/// barycentre of the ray targets. Those barycentres define a node map used to
/// follow how source cells deform along the interpolation.
class DynamicalCoupling {
 public:
  DynamicalCoupling(SampledSpacePtr space, std::vector<Ray> rays);

  const SampledSpace& space() const { return *space_; }
  const SampledSpacePtr& space_ptr() const { return space_; }
  const std::vector<Ray>& rays() const { return rays_; }

  Point position(const Ray& ray, double t) const;

  // Per distinct source node (in increasing node order).
  const std::vector<std::size_t>& source_nodes() const { return source_nodes_; }
  const std::vector<double>& source_mass() const { return source_mass_; }
  const std::vector<Point>& barycentric_target() const { return barycentre_; }
  /// Local source index of every ray.
  const std::vector<std::size_t>& ray_source() const { return ray_source_; }

  /// Image of every source node at time t under the barycentric node map.
  std::vector<Point> source_images(double t) const;
  /// Transported cell volume of every source node at time t.
  std::vector<double> transported_volumes(double t) const;

 private:
  SampledSpacePtr space_;
  std::vector<Ray> rays_;
  std::vector<std::size_t> source_nodes_;
  std::vector<double> source_mass_;
  std::vector<Point> barycentre_;
  std::vector<std::size_t> ray_source_;
  // Cell-deformation stencil: pairs of local sources spanning a quadrant
  // around each source on several rings (2-D), or single neighbours (1-D).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> stencil_;
  std::vector<double> reference_extent_;
};

DynamicalCoupling dynamical_coupling(const TransportPlan& plan);

struct InterpolantMeasure {
  DiscreteMeasure measure;
  double t;
};

/// Pushes every ray's mass to its time-t point, snapped to the nearest node.
InterpolantMeasure evaluate(const DynamicalCoupling& coupling, double t);

struct DensityField {
  SampledSpacePtr space;
  std::vector<double> rho;
};

DensityField density(const DiscreteMeasure& mu);

/// How the density along a ray is read off.
enum class DensityMode {
  /// Source density divided by the transported cell volume (cell Jacobian of
  /// the barycentric node map).
  jacobian,
  /// Density of the snapped interpolant at the ray's snapped node.
  snapped,
};

/// r_t for every ray (+inf when the carrier cell collapsed).
std::vector<double> ray_densities(const DynamicalCoupling& coupling, double t, DensityMode mode);

struct RatioOptions {
  double mass_floor = 1e-6;
  double tolerance = 0.1;  // multiplicative
  DensityMode mode = DensityMode::jacobian;
};

struct RatioReport {
  double t0 = 0.0;
  double t1 = 0.0;
  int m = 0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double checked_mass = 0.0;
  double violating_mass_fraction = 0.0;
  std::size_t excluded_rays = 0;
  std::optional<std::size_t> worst_ray;
};

/// Checks ((1-t1)/(1-t0))^m <= r_t1 / r_t0 <= (t1/t0)^m along every ray.
RatioReport density_ratio_check(const DynamicalCoupling& coupling, double t0, double t1, int m,
                                const RatioOptions& options = {});

/// CSV: t,node,mass,rho
void write_interpolant_csv(std::ostream& out, const InterpolantMeasure& mu_t);

}  // namespace cdlab
