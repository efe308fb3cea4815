#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdlab {

enum class SpaceKind { euclidean_box, flat_torus, round_sphere, flat_cone, hyperbolic_disk };

std::string to_string(SpaceKind kind);
std::optional<SpaceKind> space_kind_from_string(const std::string& name);

/// Chart coordinates of a point. Meaning depends on the space:
///   euclidean_box, flat_torus:  (x, y) Cartesian; 1-D box uses c0 only
///   round_sphere:               (latitude, longitude) in radians
///   flat_cone:                  (r, phi) with phi in [0, total_angle)
///   hyperbolic_disk:            (x, y) in the Poincare unit disk
struct Point {
  double c0 = 0.0;
  double c1 = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Diagonal of the inverse metric tensor g^{ij} in chart coordinates.
struct InverseMetric {
  double g00 = 1.0;
  double g11 = 1.0;
};

/// A geodesic metric space given by closed-form distance and geodesic oracles.
///
/// All oracles are pure; a ModelSpace is an immutable value.
class ModelSpace {
 public:
  static ModelSpace euclidean_box(double side, int dim = 2);
  static ModelSpace flat_torus(double side);
  static ModelSpace round_sphere(double radius);
  static ModelSpace flat_cone(double total_angle, double radial_cutoff);
  static ModelSpace hyperbolic_disk(double chart_radius = 0.8);

  SpaceKind kind() const { return kind_; }
  int dim() const { return dim_; }
  std::string name() const { return to_string(kind_); }

  double side() const;           // box, torus
  double radius() const;         // sphere
  double total_angle() const;    // cone
  double radial_cutoff() const;  // cone
  double chart_radius() const;   // hyperbolic disk

  /// True when the point lies in the chart's domain (the sampling region for
  /// the box and cone, the open unit disk for the hyperbolic chart).
  bool contains(const Point& p) const;

  /// Throws DomainError when `p` is outside the chart domain.
  void check_domain(const Point& p) const;

  /// Canonical chart coordinates (torus reduced mod side, longitudes and cone
  /// angles wrapped).
  Point canonical(const Point& p) const;

  double distance(const Point& x, const Point& y) const;

  /// Point at parameter t of a minimizing constant-speed geodesic from x to y.
  ///
  /// Ties between minimizers are broken deterministically: torus offsets are
  /// taken in [-side/2, side/2), antipodal sphere points are joined along the
  /// southward meridian (or the meridian of x's longitude from a pole), a cone
  /// pair at exactly opposite angular gaps travels in the decreasing-phi
  /// direction, and cone pairs with angular gap above pi pass through the apex.
  Point geodesic_point(const Point& x, const Point& y, double t) const;

  /// Volume of the sampled chart region.
  double analytic_volume() const;

  InverseMetric inverse_metric(const Point& p) const;

  /// sqrt(det g) in chart coordinates.
  double area_element(const Point& p) const;

 private:
  ModelSpace(SpaceKind kind, int dim, double p0, double p1)
      : kind_(kind), dim_(dim), p0_(p0), p1_(p1) {}

  SpaceKind kind_;
  int dim_;
  double p0_;
  double p1_;
};

/// Inclusive run of columns in one grid row. Runs never wrap.
struct CandidateRun {
  int row;
  int col_begin;
  int col_end;  // inclusive
};

/// Finite sample of a ModelSpace on a tensor chart grid.
///
/// Grid layout per kind (rows x cols, nodes at cell centres):
///   box/torus: x rows, y cols (1-D box: n x 1)
///   sphere:    latitude bands x longitudes (longitude periodic)
///   cone:      radial shells x angles (angle periodic)
///   hyperbolic polar shells x angles of the disk |x| <= chart_radius
/// Node count is resolution^dim.
class SampledSpace {
 public:
  static std::shared_ptr<const SampledSpace> sample(const ModelSpace& space, int resolution);

  const ModelSpace& space() const { return space_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return nodes_.size(); }

  const Point& node(std::size_t i) const { return nodes_[i]; }
  double cell_volume(std::size_t i) const { return cell_volume_[i]; }
  std::span<const Point> nodes() const { return nodes_; }
  std::span<const double> cell_volumes() const { return cell_volume_; }
  double total_volume() const;

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool periodic_rows() const { return periodic_rows_; }
  bool periodic_cols() const { return periodic_cols_; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(col);
  }
  int row_of(std::size_t i) const { return static_cast<int>(i / static_cast<std::size_t>(cols_)); }
  int col_of(std::size_t i) const { return static_cast<int>(i % static_cast<std::size_t>(cols_)); }

  /// Grid neighbour at a row/column offset, wrapping periodic axes.
  std::optional<std::size_t> neighbor(std::size_t i, int drow, int dcol) const;

  /// Row and column chart coordinates and spacings.
  double row_coord(int row) const;
  double col_coord(int col) const;
  double row_step() const { return row_step_; }
  double col_step() const { return col_step_; }

  /// Largest metric extent of a cell; used to scale resolution tolerances.
  double grid_step() const;

  /// Nearest node; ties resolve to the lowest node index.
  std::size_t snap(const Point& p) const;

  /// Column runs covering every node within `radius` of `x` (a superset).
  std::vector<CandidateRun> candidate_runs(const Point& x, double radius) const;

 private:
  SampledSpace(const ModelSpace& space, int resolution);

  // Chart coordinates used for the row/column grid (polar for the
  // hyperbolic disk).
  std::pair<double, double> grid_coords(const Point& p) const;
  void push_col_window(std::vector<CandidateRun>& out, int row, double centre,
                       double half_width) const;

  ModelSpace space_;
  int resolution_;
  int rows_ = 0;
  int cols_ = 1;
  bool periodic_rows_ = false;
  bool periodic_cols_ = false;
  double row_origin_ = 0.0;
  double col_origin_ = 0.0;
  double row_step_ = 0.0;
  double col_step_ = 0.0;
  std::vector<Point> nodes_;
  std::vector<double> cell_volume_;
};

/// Distances from sampled nodes without per-call domain checks, with
/// per-node trigonometry precomputed. Agrees with ModelSpace::distance.
class NodeMetric {
 public:
  /// Precomputed form of one point.
  struct Entry {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
  };

  explicit NodeMetric(const SampledSpace& sampled);

  /// Validates `p` against the chart domain once.
  Entry entry(const Point& p) const;
  const Entry& node(std::size_t i) const { return entries_[i]; }
  double distance(const Entry& x, std::size_t node) const;
  double distance(std::size_t i, std::size_t j) const { return distance(entries_[i], j); }

 private:
  ModelSpace space_;
  SpaceKind kind_;
  int dim_;
  double p0_ = 0.0;
  std::vector<Entry> entries_;
};

/// CSV: node,c0,c1,cell_volume
void write_sampled_space_csv(std::ostream& out, const SampledSpace& sampled);

}  // namespace cdlab
