#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "cdlab/interpolation.hpp"
#include "cdlab/random.hpp"
#include "cdlab/transport.hpp"

namespace cdlab {

namespace detail {
class ShiftKernel;
}

/// Extended-real field on the nodes of a sampled space. +inf and -inf are
/// allowed as sentinels; NaN is not, and at least one value must be finite.
class ScalarField {
 public:
  ScalarField(SampledSpacePtr space, std::vector<double> values);
  static ScalarField from_function(SampledSpacePtr space, const std::function<double(const Point&)>& f);

  const SampledSpace& space() const { return *space_; }
  const SampledSpacePtr& space_ptr() const { return space_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  ScalarField negated() const;

 private:
  SampledSpacePtr space_;
  std::vector<double> values_;
};

/// Hopf-Lax shift: x -> min over nodes y of f(y) + d(x, y)^2 / (2t).
///
/// Nodes where f is +inf are left out of the minimum. Throws ShiftError when
/// f is +inf everywhere or takes the value -inf anywhere.
ScalarField hj_shift(const ScalarField& f, double t);

/// The same minimum evaluated at an arbitrary point of the space.
double hj_value_at(const ScalarField& f, double t, const Point& p);

/// max over nodes of HJ_t1(HJ_t0 f) - HJ_(t0+t1) f.
double semigroup_defect(const ScalarField& f, double t0, double t1);

/// The shifts f_t of one base field, computed once per time.
class ShiftFamily {
 public:
  ShiftFamily(ScalarField base, std::vector<double> times);

  const ScalarField& base() const { return base_; }
  const std::vector<double>& times() const { return times_; }
  /// Cached node field f_t; `t` must be one of times().
  const ScalarField& at(double t) const;
  /// f_t at an arbitrary point (not cached).
  double value_at(double t, const Point& p) const;

 private:
  ScalarField base_;
  std::vector<double> times_;
  mutable std::map<double, ScalarField> cache_;
  mutable std::shared_ptr<const detail::ShiftKernel> kernel_;
};

using GeodesicSegment = std::pair<Point, Point>;

/// Endpoint pairs drawn uniformly from the chart region, joined by a unique
/// minimizing geodesic (sphere pairs stay away from antipodes).
std::vector<GeodesicSegment> random_segments(const ModelSpace& space, int count, std::uint64_t seed);

/// A point drawn uniformly (by volume) from the sampling region.
Point random_point(const ModelSpace& space, Rng& rng);

/// Sum of a_k * d(., c_k) over four random centres with |a_k| <= 1/2.
ScalarField random_lipschitz_field(const SampledSpacePtr& space, std::uint64_t seed);

struct FamilyConcavityReport {
  double t = 0.0;
  std::size_t segments = 0;
  int points = 0;
  /// Largest second difference of s -> f_t(gamma(s)) - s^2 / (2t).
  double max_second_difference = 0.0;
  std::optional<std::size_t> worst_segment;
  double tolerance = 0.0;
  bool pass = true;
};

/// Checks that f_t - s^2 / (2t) is concave along each segment, sampled at
/// `points` equally spaced arclength values.
FamilyConcavityReport family_concavity_check(const ShiftFamily& family, double t,
                                             const std::vector<GeodesicSegment>& segments, int points = 9,
                                             double tolerance = 1e-9);

/// Snap error bound for psi_t + phi_t at a node next to gamma(t):
/// grid_step^2 / (4 t (1 - t)).
double potential_tolerance(const SampledSpace& space, double t);

struct PotentialCheckOptions {
  double mass_floor = 1e-9;
  /// Defaults to potential_tolerance plus the certified duality gap.
  std::optional<double> tolerance;
  double identity_tolerance = 1e-8;
};

struct PotentialInterpolationReport {
  double t = 0.0;
  double tolerance = 0.0;
  /// min over nodes of psi_t + phi_t
  double min_sum = 0.0;
  std::size_t min_sum_node = 0;
  /// max over rays of |psi_t + phi_t| at the snapped node of gamma(t)
  double max_support_sum = 0.0;
  std::optional<std::size_t> worst_support_ray;
  /// max over rays of |psi_t(gamma(t)) - psi(x) - t d(x, y)^2 / 2|
  double max_identity_error = 0.0;
  std::optional<std::size_t> worst_identity_ray;
  std::size_t checked_rays = 0;
  bool lower_bound_ok = true;
  bool support_ok = true;
  bool identity_ok = true;
  bool pass = true;
};

/// psi_t = HJ_t psi and phi_t = HJ_(1-t)(-phi) along an optimal coupling.
PotentialInterpolationReport potential_interpolation_check(const PotentialPair& pair,
                                                           const DynamicalCoupling& coupling, double t,
                                                           const PotentialCheckOptions& options = {});

struct ReverseContractionReport {
  double t0 = 0.0;
  double t1 = 0.0;
  /// (t0 / t1) * ((1 - t1) / (1 - t0))^2
  double factor = 0.0;
  std::size_t pairs = 0;
  /// max over pairs of factor * l(t0) - l(t1)
  double max_shortfall = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> worst_pair;
  double tolerance = 0.0;
  bool pass = true;
};

double reverse_contraction_factor(double t0, double t1);

/// Checks l(t1) >= factor * l(t0) - tol for `pairs` seeded pairs of rays with
/// mass above `mass_floor`, l(t) being the distance between the two rays.
ReverseContractionReport reverse_contraction_check(const DynamicalCoupling& coupling, double t0, double t1,
                                                   int pairs, std::uint64_t seed, double tolerance = 1e-9,
                                                   double mass_floor = 1e-9);

/// CSV: node,value
void write_field_csv(std::ostream& out, const ScalarField& f);

}  // namespace cdlab
