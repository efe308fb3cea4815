#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cdlab/hamilton_jacobi.hpp"
#include "cdlab/interpolation.hpp"
#include "cdlab/spaces.hpp"

namespace cdlab {

using PointFunction = std::function<double(const Point&)>;

/// Chart components of a tangent vector.
struct ChartVector {
  double v0 = 0.0;
  double v1 = 0.0;
};

/// Time-dependent fields f_t on a model space that are lambda(t)-concave.
struct FamilyOfFields {
  ModelSpace space;
  /// Open time interval of definition.
  double t_begin = 0.0;
  double t_end = 1.0;
  std::function<double(double, const Point&)> value;
  std::function<double(double)> lambda;
  /// Bound on |grad f_t| (used to sanity-check integrated curves).
  double lipschitz = 0.0;
};

/// A time-independent field with constant concavity parameter.
FamilyOfFields static_family(const ModelSpace& space, PointFunction f, double lambda, double lipschitz);

/// f_t = HJ_t f over a sampled base field; lambda(t) = 1/t on (0, 1].
FamilyOfFields hj_family(const ScalarField& base, double lipschitz);

/// Central differences in chart coordinates with step `h`, raised by the
/// inverse metric. Throws DomainError when the stencil leaves the chart.
ChartVector finite_difference_gradient(const ModelSpace& space, const PointFunction& f, const Point& x,
                                       double h);

/// Riemannian norm of a chart vector at x.
double tangent_norm(const ModelSpace& space, const Point& x, const ChartVector& v);

/// Laplace-Beltrami operator by the chart's divergence form with steps `h`.
double finite_difference_laplacian(const ModelSpace& space, const PointFunction& f, const Point& x, double h);

/// Chart second derivatives (symmetric by construction) and the
/// Laplace-Beltrami value as trace.
struct HessianEstimate {
  double h00 = 0.0;
  double h01 = 0.0;
  double h11 = 0.0;
  double trace = 0.0;
};

HessianEstimate finite_difference_hessian(const ModelSpace& space, const PointFunction& f, const Point& x,
                                          double h);

struct Curve {
  std::vector<double> times;
  std::vector<Point> points;
  double step = 0.0;
  /// Set when the curve left the chart and was cut short.
  bool truncated = false;

  /// Sample at time t (nearest sample within half a step).
  const Point& at(double t) const;
};

struct FlowOptions {
  double step = 1e-3;
  /// Finite-difference step in chart units.
  double fd_step = 1e-4;
};

/// Explicit Euler for x' = grad f_t(x) from (t0, x0) to t_end.
Curve gradient_curve(const FamilyOfFields& family, const Point& x0, double t0, double t_end,
                     const FlowOptions& options = {});

/// Geodesic of one ray of a coupling sampled at `times`.
Curve ray_curve(const DynamicalCoupling& coupling, std::size_t ray, const std::vector<double>& times);

/// exp of the integral of lambda over [t0, t1] (composite Simpson).
double contraction_bound(const FamilyOfFields& family, double t0, double t1, int panels = 1000);

struct ContractionReport {
  double t0 = 0.0;
  double t1 = 0.0;
  double bound = 0.0;  // L
  double distance0 = 0.0;
  double distance1 = 0.0;
  /// distance1 - L * distance0
  double excess = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

ContractionReport contraction_check(const FamilyOfFields& family, const Curve& a, const Curve& b, double t0,
                                    double t1, double tolerance);

struct LaplacianOptions {
  int validation_segments = 50;
  int validation_points = 9;
  double validation_tolerance = 1e-9;
  std::uint64_t seed = 1;
  /// Excess allowed per unit grid step.
  double constant = 1.0;
};

struct LaplacianReport {
  double lambda = 0.0;
  int m = 0;
  std::size_t nodes = 0;
  double max_laplacian = 0.0;
  /// max over interior nodes of laplacian - m * lambda
  double max_excess = 0.0;
  std::optional<std::size_t> worst_node;
  double tolerance = 0.0;
  bool pass = true;
};

/// Validates lambda-concavity of f along seeded segments (PreconditionError
/// naming the first violating segment), then bounds the finite-difference
/// Laplacian by m * lambda at every node whose stencil stays in the chart.
LaplacianReport laplacian_bound_check(const SampledSpace& space, const PointFunction& f, double lambda, int m,
                                      const LaplacianOptions& options = {});

/// Chart rectangle [lo0, hi0] x [lo1, hi1].
struct ChartBox {
  double lo0 = 0.0;
  double hi0 = 0.0;
  double lo1 = 0.0;
  double hi1 = 0.0;
  bool contains(const Point& p) const { return p.c0 >= lo0 && p.c0 <= hi0 && p.c1 >= lo1 && p.c1 <= hi1; }
};

struct VolumeEvolutionOptions {
  FlowOptions flow;
  /// Simpson panels over [t0, t1] (even).
  int panels = 8;
  double tolerance = 0.05;
};

struct VolumeEvolutionReport {
  std::vector<double> times;
  /// vol of the preimage of E at each time
  std::vector<double> volume;
  /// integral of the Laplacian over each preimage
  std::vector<double> laplacian_mass;
  double volume_change = 0.0;  // v(t1) - v(t0)
  double integral = 0.0;
  /// |change - integral| over the larger side, floored at one seed cell
  double relative_mismatch = 0.0;
  /// Preimage reached the seed grid border.
  bool boundary_flag = false;
  double tolerance = 0.0;
  bool pass = true;
};

/// Seeds a sample_n x sample_n chart grid over `seeds` at each quadrature
/// time, flows it to t1 and counts the cells landing in `target`.
VolumeEvolutionReport volume_evolution_check(const FamilyOfFields& family, const ChartBox& target,
                                             const ChartBox& seeds, double t0, double t1, int sample_n,
                                             const VolumeEvolutionOptions& options = {});

/// A smooth field on a flat chart with analytic derivatives.
struct SmoothField {
  std::function<double(const Point&)> value;
  std::function<ChartVector(const Point&)> gradient;
  std::function<std::array<double, 3>(const Point&)> hessian;  // h00, h01, h11
};

/// HJ_t f(z) for a smooth field on euclidean_box, by Newton iteration on
/// y -> f(y) + |z - y|^2 / (2t) started at z.
double smooth_hj_value(const SmoothField& f, double t, const Point& z);

/// Compactly supported cubic B-spline bump on [centre - half_width,
/// centre + half_width] and its derivative.
double bump(double t, double centre, double half_width);
double bump_derivative(double t, double centre, double half_width);

struct RiccatiOptions {
  double fd_step = 1e-3;
  std::vector<double> centres{0.3, 0.5, 0.7};
  double half_width = 0.2;
  double tolerance = 1e-6;
};

struct RiccatiReport {
  int m = 0;
  std::vector<double> times;
  /// Hessian trace of f_t at the ray point
  std::vector<double> trace;
  /// per bump: integral of (h u' - h^2 u / m)
  std::vector<double> weak_values;
  double min_weak_value = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// Weak form of h' <= -h^2 / m along `ray` for f_t = HJ_t f; the ray's
/// times must be uniformly spaced and cover the bumps' supports.
RiccatiReport riccati_check(const SmoothField& f, const Curve& ray, int m, const RiccatiOptions& options = {});

/// CSV: t,c0,c1
void write_curve_csv(std::ostream& out, const Curve& curve);

}  // namespace cdlab
