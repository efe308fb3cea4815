#include "cdlab/spaces.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

#include "cdlab/errors.hpp"
#include "format.hpp"

namespace cdlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDomainSlack = 1e-12;

using Vec3 = std::array<double, 3>;

Vec3 sphere_unit(double lat, double lon) {
  const double cl = std::cos(lat);
  return {cl * std::cos(lon), cl * std::sin(lon), std::sin(lat)};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Wrap into [lo, lo + period).
double wrap(double value, double lo, double period) {
  double w = value - period * std::floor((value - lo) / period);
  if (w >= lo + period) w -= period;
  return w;
}

// Torus offset in [-side/2, side/2).
double torus_offset(double d, double side) {
  double w = d - side * std::floor(d / side + 0.5);
  if (w >= 0.5 * side) w -= side;
  return w;
}

// Angular gap between cone angles (unsigned, <= total/2).
double cone_gap(double a, double b, double total) {
  double g = std::fmod(std::abs(a - b), total);
  return std::min(g, total - g);
}

using Complex = std::complex<double>;

Complex to_complex(const Point& p) { return {p.c0, p.c1}; }

// Moebius map of the unit disk sending a to 0.
Complex to_origin(Complex z, Complex a) { return (z - a) / (1.0 - std::conj(a) * z); }
Complex from_origin(Complex z, Complex a) { return (z + a) / (1.0 + std::conj(a) * z); }

}  // namespace

std::string to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::euclidean_box: return "euclidean_box";
    case SpaceKind::flat_torus: return "flat_torus";
    case SpaceKind::round_sphere: return "round_sphere";
    case SpaceKind::flat_cone: return "flat_cone";
    case SpaceKind::hyperbolic_disk: return "hyperbolic_disk";
  }
  return "unknown";
}

std::optional<SpaceKind> space_kind_from_string(const std::string& name) {
  for (auto kind : {SpaceKind::euclidean_box, SpaceKind::flat_torus, SpaceKind::round_sphere,
                    SpaceKind::flat_cone, SpaceKind::hyperbolic_disk}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ModelSpace

ModelSpace ModelSpace::euclidean_box(double side, int dim) {
  if (!(side > 0.0)) throw DomainError("euclidean_box: side must be positive");
  if (dim != 1 && dim != 2) throw DomainError("euclidean_box: dim must be 1 or 2");
  return {SpaceKind::euclidean_box, dim, side, 0.0};
}

ModelSpace ModelSpace::flat_torus(double side) {
  if (!(side > 0.0)) throw DomainError("flat_torus: side must be positive");
  return {SpaceKind::flat_torus, 2, side, 0.0};
}

ModelSpace ModelSpace::round_sphere(double radius) {
  if (!(radius > 0.0)) throw DomainError("round_sphere: radius must be positive");
  return {SpaceKind::round_sphere, 2, radius, 0.0};
}

ModelSpace ModelSpace::flat_cone(double total_angle, double radial_cutoff) {
  if (!(total_angle > 0.0)) throw DomainError("flat_cone: total_angle must be positive");
  if (!(radial_cutoff > 0.0)) throw DomainError("flat_cone: radial_cutoff must be positive");
  return {SpaceKind::flat_cone, 2, total_angle, radial_cutoff};
}

ModelSpace ModelSpace::hyperbolic_disk(double chart_radius) {
  if (!(chart_radius > 0.0 && chart_radius < 1.0)) {
    throw DomainError("hyperbolic_disk: chart_radius must lie in (0, 1)");
  }
  return {SpaceKind::hyperbolic_disk, 2, chart_radius, 0.0};
}

double ModelSpace::side() const {
  if (kind_ != SpaceKind::euclidean_box && kind_ != SpaceKind::flat_torus) {
    throw DomainError(name() + " has no side length");
  }
  return p0_;
}

double ModelSpace::radius() const {
  if (kind_ != SpaceKind::round_sphere) throw DomainError(name() + " has no radius");
  return p0_;
}

double ModelSpace::total_angle() const {
  if (kind_ != SpaceKind::flat_cone) throw DomainError(name() + " has no total angle");
  return p0_;
}

double ModelSpace::radial_cutoff() const {
  if (kind_ != SpaceKind::flat_cone) throw DomainError(name() + " has no radial cutoff");
  return p1_;
}

double ModelSpace::chart_radius() const {
  if (kind_ != SpaceKind::hyperbolic_disk) throw DomainError(name() + " has no chart radius");
  return p0_;
}

bool ModelSpace::contains(const Point& p) const {
  if (!std::isfinite(p.c0) || !std::isfinite(p.c1)) return false;
  switch (kind_) {
    case SpaceKind::euclidean_box:
      if (p.c0 < -kDomainSlack || p.c0 > p0_ + kDomainSlack) return false;
      return dim_ == 1 || (p.c1 >= -kDomainSlack && p.c1 <= p0_ + kDomainSlack);
    case SpaceKind::flat_torus:
      return true;
    case SpaceKind::round_sphere:
      return std::abs(p.c0) <= 0.5 * kPi + kDomainSlack;
    case SpaceKind::flat_cone:
      return p.c0 >= -kDomainSlack && p.c0 <= p1_ + kDomainSlack && p.c1 >= -kDomainSlack &&
             p.c1 <= p0_ + kDomainSlack;
    case SpaceKind::hyperbolic_disk:
      return p.c0 * p.c0 + p.c1 * p.c1 < 1.0;
  }
  return false;
}

void ModelSpace::check_domain(const Point& p) const {
  if (!contains(p)) {
    throw DomainError(name() + ": point (" + format_double(p.c0) + ", " + format_double(p.c1) +
                      ") outside chart domain");
  }
}

Point ModelSpace::canonical(const Point& p) const {
  switch (kind_) {
    case SpaceKind::flat_torus:
      return {wrap(p.c0, 0.0, p0_), wrap(p.c1, 0.0, p0_)};
    case SpaceKind::round_sphere:
      return {std::clamp(p.c0, -0.5 * kPi, 0.5 * kPi), wrap(p.c1, -kPi, 2.0 * kPi)};
    case SpaceKind::flat_cone:
      return {std::max(p.c0, 0.0), wrap(p.c1, 0.0, p0_)};
    default:
      return p;
  }
}

double ModelSpace::distance(const Point& x, const Point& y) const {
  check_domain(x);
  check_domain(y);
  switch (kind_) {
    case SpaceKind::euclidean_box:
      if (dim_ == 1) return std::abs(x.c0 - y.c0);
      return std::hypot(x.c0 - y.c0, x.c1 - y.c1);
    case SpaceKind::flat_torus:
      return std::hypot(torus_offset(x.c0 - y.c0, p0_), torus_offset(x.c1 - y.c1, p0_));
    case SpaceKind::round_sphere: {
      const Vec3 u = sphere_unit(x.c0, x.c1);
      const Vec3 v = sphere_unit(y.c0, y.c1);
      return p0_ * std::atan2(norm(cross(u, v)), dot(u, v));
    }
    case SpaceKind::flat_cone: {
      const double gap = cone_gap(x.c1, y.c1, p0_);
      if (gap > kPi) return x.c0 + y.c0;
      const double s = std::sin(0.5 * gap);
      const double dr = x.c0 - y.c0;
      return std::sqrt(dr * dr + 4.0 * x.c0 * y.c0 * s * s);
    }
    case SpaceKind::hyperbolic_disk: {
      const double dx = x.c0 - y.c0;
      const double dy = x.c1 - y.c1;
      const double denom = (1.0 - (x.c0 * x.c0 + x.c1 * x.c1)) * (1.0 - (y.c0 * y.c0 + y.c1 * y.c1));
      return 2.0 * std::asinh(std::sqrt((dx * dx + dy * dy) / denom));
    }
  }
  return 0.0;
}

Point ModelSpace::geodesic_point(const Point& x, const Point& y, double t) const {
  check_domain(x);
  check_domain(y);
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("geodesic_point: t must lie in [0, 1]");
  if (t == 0.0) return x;
  if (t == 1.0) return y;

  switch (kind_) {
    case SpaceKind::euclidean_box:
      return {x.c0 + t * (y.c0 - x.c0), dim_ == 1 ? 0.0 : x.c1 + t * (y.c1 - x.c1)};
    case SpaceKind::flat_torus: {
      const double dx = torus_offset(y.c0 - x.c0, p0_);
      const double dy = torus_offset(y.c1 - x.c1, p0_);
      return canonical({x.c0 + t * dx, x.c1 + t * dy});
    }
    case SpaceKind::round_sphere: {
      const Vec3 u = sphere_unit(x.c0, x.c1);
      const Vec3 v = sphere_unit(y.c0, y.c1);
      const double sin_w = norm(cross(u, v));
      const double cos_w = dot(u, v);
      const double omega = std::atan2(sin_w, cos_w);
      if (omega == 0.0) return x;
      Vec3 dir;
      if (sin_w < 1e-14 && cos_w < 0.0) {
        // Antipodal: southward meridian, or the meridian of x's longitude
        // when leaving the south pole.
        const double sl = std::sin(x.c0);
        const double cl = std::cos(x.c0);
        const double sign = (x.c0 <= -0.5 * kPi + 1e-15) ? 1.0 : -1.0;
        dir = {sign * -sl * std::cos(x.c1), sign * -sl * std::sin(x.c1), sign * cl};
        if (x.c0 <= -0.5 * kPi + 1e-15) dir = {std::cos(x.c1), std::sin(x.c1), 0.0};
      } else {
        dir = {v[0] - cos_w * u[0], v[1] - cos_w * u[1], v[2] - cos_w * u[2]};
      }
      const double dn = norm(dir);
      for (double& c : dir) c /= dn;
      const double a = t * omega;
      const double ca = std::cos(a);
      const double sa = std::sin(a);
      const Vec3 p = {ca * u[0] + sa * dir[0], ca * u[1] + sa * dir[1], ca * u[2] + sa * dir[2]};
      const double horiz = std::hypot(p[0], p[1]);
      const double lat = std::atan2(p[2], horiz);
      const double lon = horiz > 0.0 ? std::atan2(p[1], p[0]) : 0.0;
      return canonical({lat, lon});
    }
    case SpaceKind::flat_cone: {
      const double total = p0_;
      const double forward = wrap(y.c1 - x.c1, 0.0, total);
      const double backward = total - forward;
      double gap = forward;
      double sign = 1.0;
      if (backward <= forward) {
        gap = backward;
        sign = -1.0;
      }
      if (forward == 0.0) {
        gap = 0.0;
        sign = 1.0;
      }
      if (gap > kPi) {
        const double travelled = t * (x.c0 + y.c0);
        if (travelled <= x.c0) return {x.c0 - travelled, x.c1};
        return {travelled - x.c0, y.c1};
      }
      // Develop into the plane with x on the positive axis.
      const double px = (1.0 - t) * x.c0 + t * y.c0 * std::cos(gap);
      const double py = t * y.c0 * std::sin(gap);
      const double r = std::hypot(px, py);
      const double alpha = std::atan2(py, px);
      return canonical({r, x.c1 + sign * alpha});
    }
    case SpaceKind::hyperbolic_disk: {
      const Complex a = to_complex(x);
      const Complex w = to_origin(to_complex(y), a);
      const double aw = std::abs(w);
      if (aw == 0.0) return x;
      const double rho = 2.0 * std::atanh(aw);
      const Complex u = std::tanh(0.5 * t * rho) * (w / aw);
      const Complex z = from_origin(u, a);
      return {z.real(), z.imag()};
    }
  }
  return x;
}

double ModelSpace::analytic_volume() const {
  switch (kind_) {
    case SpaceKind::euclidean_box:
      return dim_ == 1 ? p0_ : p0_ * p0_;
    case SpaceKind::flat_torus:
      return p0_ * p0_;
    case SpaceKind::round_sphere:
      return 4.0 * kPi * p0_ * p0_;
    case SpaceKind::flat_cone:
      return 0.5 * p0_ * p1_ * p1_;
    case SpaceKind::hyperbolic_disk:
      return 4.0 * kPi * p0_ * p0_ / (1.0 - p0_ * p0_);
  }
  return 0.0;
}

InverseMetric ModelSpace::inverse_metric(const Point& p) const {
  switch (kind_) {
    case SpaceKind::round_sphere: {
      const double r2 = p0_ * p0_;
      const double c = std::cos(p.c0);
      return {1.0 / r2, 1.0 / (r2 * c * c)};
    }
    case SpaceKind::flat_cone:
      return {1.0, 1.0 / (p.c0 * p.c0)};
    case SpaceKind::hyperbolic_disk: {
      const double s = 1.0 - (p.c0 * p.c0 + p.c1 * p.c1);
      const double inv = 0.25 * s * s;
      return {inv, inv};
    }
    default:
      return {};
  }
}

double ModelSpace::area_element(const Point& p) const {
  switch (kind_) {
    case SpaceKind::round_sphere:
      return p0_ * p0_ * std::cos(p.c0);
    case SpaceKind::flat_cone:
      return p.c0;
    case SpaceKind::hyperbolic_disk: {
      const double s = 1.0 - (p.c0 * p.c0 + p.c1 * p.c1);
      return 4.0 / (s * s);
    }
    default:
      return 1.0;
  }
}

// ---------------------------------------------------------------------------
// SampledSpace

std::shared_ptr<const SampledSpace> SampledSpace::sample(const ModelSpace& space, int resolution) {
  if (resolution < 2) throw PreconditionError("sample: resolution must be at least 2");
  return std::shared_ptr<const SampledSpace>(new SampledSpace(space, resolution));
}

SampledSpace::SampledSpace(const ModelSpace& space, int resolution)
    : space_(space), resolution_(resolution) {
  const int n = resolution;
  const double dn = static_cast<double>(n);
  rows_ = n;
  cols_ = space.dim() == 1 ? 1 : n;

  switch (space.kind()) {
    case SpaceKind::euclidean_box:
    case SpaceKind::flat_torus:
      row_step_ = space.side() / dn;
      col_step_ = space.dim() == 1 ? 0.0 : space.side() / dn;
      periodic_rows_ = periodic_cols_ = space.kind() == SpaceKind::flat_torus;
      break;
    case SpaceKind::round_sphere:
      row_origin_ = -0.5 * kPi;
      row_step_ = kPi / dn;
      col_origin_ = -kPi;
      col_step_ = 2.0 * kPi / dn;
      periodic_cols_ = true;
      break;
    case SpaceKind::flat_cone:
      row_step_ = space.radial_cutoff() / dn;
      col_step_ = space.total_angle() / dn;
      periodic_cols_ = true;
      break;
    case SpaceKind::hyperbolic_disk:
      row_step_ = space.chart_radius() / dn;
      col_step_ = 2.0 * kPi / dn;
      periodic_cols_ = true;
      break;
  }

  nodes_.reserve(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_));
  cell_volume_.reserve(nodes_.capacity());
  for (int i = 0; i < rows_; ++i) {
    const double a = row_coord(i);
    const double a_lo = row_origin_ + i * row_step_;
    const double a_hi = a_lo + row_step_;
    for (int j = 0; j < cols_; ++j) {
      const double b = space.dim() == 1 ? 0.0 : col_coord(j);
      double volume = 0.0;
      Point p{a, b};
      switch (space.kind()) {
        case SpaceKind::euclidean_box:
        case SpaceKind::flat_torus:
          volume = space.dim() == 1 ? row_step_ : row_step_ * col_step_;
          break;
        case SpaceKind::round_sphere: {
          const double r = space.radius();
          volume = col_step_ * r * r * std::abs(std::sin(a_hi) - std::sin(a_lo));
          break;
        }
        case SpaceKind::flat_cone:
          volume = a * row_step_ * col_step_;
          break;
        case SpaceKind::hyperbolic_disk: {
          const double lo2 = a_lo * a_lo;
          const double hi2 = a_hi * a_hi;
          volume = col_step_ * 2.0 * (hi2 - lo2) / ((1.0 - lo2) * (1.0 - hi2));
          p = {a * std::cos(b), a * std::sin(b)};
          break;
        }
      }
      nodes_.push_back(p);
      cell_volume_.push_back(volume);
    }
  }
}

double SampledSpace::total_volume() const {
  double total = 0.0;
  for (double v : cell_volume_) total += v;
  return total;
}

double SampledSpace::row_coord(int row) const { return row_origin_ + (row + 0.5) * row_step_; }
double SampledSpace::col_coord(int col) const { return col_origin_ + (col + 0.5) * col_step_; }

double SampledSpace::grid_step() const {
  switch (space_.kind()) {
    case SpaceKind::euclidean_box:
    case SpaceKind::flat_torus:
      return std::max(row_step_, col_step_);
    case SpaceKind::round_sphere:
      return space_.radius() * std::max(row_step_, col_step_);
    case SpaceKind::flat_cone:
      return std::max(row_step_, space_.radial_cutoff() * col_step_);
    case SpaceKind::hyperbolic_disk: {
      const double r = space_.chart_radius();
      return 2.0 / (1.0 - r * r) * std::max(row_step_, r * col_step_);
    }
  }
  return row_step_;
}

std::optional<std::size_t> SampledSpace::neighbor(std::size_t i, int drow, int dcol) const {
  int r = row_of(i) + drow;
  int c = col_of(i) + dcol;
  if (r < 0 || r >= rows_) {
    if (!periodic_rows_) return std::nullopt;
    r = ((r % rows_) + rows_) % rows_;
  }
  if (c < 0 || c >= cols_) {
    if (!periodic_cols_) return std::nullopt;
    c = ((c % cols_) + cols_) % cols_;
  }
  return index(r, c);
}

std::pair<double, double> SampledSpace::grid_coords(const Point& p) const {
  const Point q = space_.canonical(p);
  if (space_.kind() == SpaceKind::hyperbolic_disk) {
    return {std::hypot(q.c0, q.c1), wrap(std::atan2(q.c1, q.c0), 0.0, 2.0 * kPi)};
  }
  return {q.c0, q.c1};
}

std::size_t SampledSpace::snap(const Point& p) const {
  space_.check_domain(p);
  const auto [a, b] = grid_coords(p);
  auto nearest_index = [](double coord, double origin, double step, int count, bool periodic) {
    const double u = (coord - origin) / step - 0.5;
    int k = static_cast<int>(std::ceil(u - 0.5));
    if (periodic) {
      k = ((k % count) + count) % count;
    } else {
      k = std::clamp(k, 0, count - 1);
    }
    return k;
  };
  const int r0 = nearest_index(a, row_origin_, row_step_, rows_, periodic_rows_);
  const int c0 = cols_ == 1 ? 0 : nearest_index(b, col_origin_, col_step_, cols_, periodic_cols_);

  // Refine over the 3x3 block with the metric; ties keep the lowest index.
  std::size_t best = index(r0, c0);
  double best_d = space_.distance(p, nodes_[best]);
  const int dc_max = cols_ == 1 ? 0 : 1;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -dc_max; dc <= dc_max; ++dc) {
      const auto nb = neighbor(index(r0, c0), dr, dc);
      if (!nb) continue;
      const double d = space_.distance(p, nodes_[*nb]);
      if (d < best_d || (d == best_d && *nb < best)) {
        best = *nb;
        best_d = d;
      }
    }
  }
  return best;
}

void SampledSpace::push_col_window(std::vector<CandidateRun>& out, int row, double centre,
                                   double half_width) const {
  if (cols_ == 1) {
    out.push_back({row, 0, 0});
    return;
  }
  const double period = col_step_ * cols_;
  if (periodic_cols_ && 2.0 * half_width + col_step_ >= period) {
    out.push_back({row, 0, cols_ - 1});
    return;
  }
  int lo = static_cast<int>(std::ceil((centre - half_width - col_origin_) / col_step_ - 0.5));
  int hi = static_cast<int>(std::floor((centre + half_width - col_origin_) / col_step_ - 0.5));
  if (hi < lo) return;
  if (!periodic_cols_) {
    lo = std::max(lo, 0);
    hi = std::min(hi, cols_ - 1);
    if (lo <= hi) out.push_back({row, lo, hi});
    return;
  }
  if (hi - lo + 1 >= cols_) {
    out.push_back({row, 0, cols_ - 1});
    return;
  }
  const int lo_w = ((lo % cols_) + cols_) % cols_;
  const int hi_w = lo_w + (hi - lo);
  if (hi_w < cols_) {
    out.push_back({row, lo_w, hi_w});
  } else {
    out.push_back({row, lo_w, cols_ - 1});
    out.push_back({row, 0, hi_w - cols_});
  }
}

std::vector<CandidateRun> SampledSpace::candidate_runs(const Point& x, double radius) const {
  std::vector<CandidateRun> out;
  const double r = radius * (1.0 + 1e-9) + 1e-12;
  const double angle_slack = 1e-9;
  const auto [xa, xb] = grid_coords(x);

  switch (space_.kind()) {
    case SpaceKind::euclidean_box:
    case SpaceKind::flat_torus: {
      const bool torus = space_.kind() == SpaceKind::flat_torus;
      for (int i = 0; i < rows_; ++i) {
        double dx = row_coord(i) - xa;
        if (torus) dx = torus_offset(dx, space_.side());
        if (std::abs(dx) > r) continue;
        push_col_window(out, i, xb, std::sqrt(std::max(0.0, r * r - dx * dx)));
      }
      break;
    }
    case SpaceKind::round_sphere: {
      const double ang = r / space_.radius();
      for (int i = 0; i < rows_; ++i) {
        const double lat = row_coord(i);
        if (ang >= kPi) {
          push_col_window(out, i, xb, kPi);
          continue;
        }
        if (std::abs(lat - xa) > ang) continue;
        const double denom = std::cos(lat) * std::cos(xa);
        if (denom <= 1e-300) {
          push_col_window(out, i, xb, kPi);
          continue;
        }
        const double c = (std::cos(ang) - std::sin(lat) * std::sin(xa)) / denom;
        if (c <= -1.0) {
          push_col_window(out, i, xb, kPi);
          continue;
        }
        push_col_window(out, i, xb, std::acos(std::min(c, 1.0)) + angle_slack);
      }
      break;
    }
    case SpaceKind::flat_cone: {
      const double total = space_.total_angle();
      for (int i = 0; i < rows_; ++i) {
        const double ri = row_coord(i);
        if (std::abs(ri - xa) > r) continue;
        if (ri + xa <= r) {
          push_col_window(out, i, xb, total);
          continue;
        }
        const double s = (r * r - (ri - xa) * (ri - xa)) / (4.0 * ri * xa);
        const double half = s >= 1.0 ? kPi : 2.0 * std::asin(std::sqrt(std::max(0.0, s)));
        push_col_window(out, i, xb, half + angle_slack);
      }
      break;
    }
    case SpaceKind::hyperbolic_disk: {
      const double rho_x = 2.0 * std::atanh(xa);
      for (int i = 0; i < rows_; ++i) {
        const double rho_i = 2.0 * std::atanh(row_coord(i));
        if (std::abs(rho_i - rho_x) > r) continue;
        const double denom = std::sinh(rho_i) * std::sinh(rho_x);
        if (denom <= 1e-300) {
          push_col_window(out, i, xb, kPi);
          continue;
        }
        const double c = (std::cosh(rho_i) * std::cosh(rho_x) - std::cosh(r)) / denom;
        if (c <= -1.0) {
          push_col_window(out, i, xb, kPi);
          continue;
        }
        push_col_window(out, i, xb, std::acos(std::min(c, 1.0)) + angle_slack);
      }
      break;
    }
  }
  return out;
}

void write_sampled_space_csv(std::ostream& out, const SampledSpace& sampled) {
  out << "node,c0,c1,cell_volume\n";
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    const Point& p = sampled.node(i);
    out << i << ',' << format_double(p.c0) << ',' << format_double(p.c1) << ','
        << format_double(sampled.cell_volume(i)) << '\n';
  }
}

NodeMetric::NodeMetric(const SampledSpace& sampled)
    : space_(sampled.space()), kind_(space_.kind()), dim_(space_.dim()) {
  const ModelSpace& space = space_;
  switch (kind_) {
    case SpaceKind::euclidean_box:
    case SpaceKind::flat_torus:
      p0_ = space.side();
      break;
    case SpaceKind::round_sphere:
      p0_ = space.radius();
      break;
    case SpaceKind::flat_cone:
      p0_ = space.total_angle();
      break;
    case SpaceKind::hyperbolic_disk:
      p0_ = space.chart_radius();
      break;
  }
  entries_.reserve(sampled.size());
  for (const auto& p : sampled.nodes()) entries_.push_back(entry(p));
}

NodeMetric::Entry NodeMetric::entry(const Point& p) const {
  space_.check_domain(p);
  switch (kind_) {
    case SpaceKind::round_sphere: {
      const Vec3 u = sphere_unit(p.c0, p.c1);
      return {u[0], u[1], u[2]};
    }
    case SpaceKind::hyperbolic_disk:
      return {p.c0, p.c1, 1.0 - (p.c0 * p.c0 + p.c1 * p.c1)};
    default:
      return {p.c0, p.c1, 0.0};
  }
}

double NodeMetric::distance(const Entry& x, std::size_t node) const {
  const Entry& y = entries_[node];
  switch (kind_) {
    case SpaceKind::euclidean_box:
      if (dim_ == 1) return std::abs(x.a - y.a);
      return std::hypot(x.a - y.a, x.b - y.b);
    case SpaceKind::flat_torus:
      return std::hypot(torus_offset(x.a - y.a, p0_), torus_offset(x.b - y.b, p0_));
    case SpaceKind::round_sphere: {
      const Vec3 u{x.a, x.b, x.c};
      const Vec3 v{y.a, y.b, y.c};
      return p0_ * std::atan2(norm(cross(u, v)), dot(u, v));
    }
    case SpaceKind::flat_cone: {
      const double gap = cone_gap(x.b, y.b, p0_);
      if (gap > kPi) return x.a + y.a;
      const double s = std::sin(0.5 * gap);
      const double dr = x.a - y.a;
      return std::sqrt(dr * dr + 4.0 * x.a * y.a * s * s);
    }
    case SpaceKind::hyperbolic_disk: {
      const double dx = x.a - y.a;
      const double dy = x.b - y.b;
      return 2.0 * std::asinh(std::sqrt((dx * dx + dy * dy) / (x.c * y.c)));
    }
  }
  return 0.0;
}

}  // namespace cdlab
