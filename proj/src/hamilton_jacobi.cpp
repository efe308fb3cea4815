#include "cdlab/hamilton_jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "cdlab/errors.hpp"
#include "format.hpp"

namespace cdlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kTile = 8;

void check_time(double t, const char* what) {
  if (!(t > 0.0) || !std::isfinite(t)) throw PreconditionError(std::string(what) + ": time must be positive");
}

}  // namespace

namespace detail {

// Minimizes f(y) + d(x, y)^2 / (2t) over the finite nodes of f.
//
// Candidates are grouped into grid tiles. A tile with centre c and radius r
// cannot beat fmin(tile) + max(0, d(x, c) - r)^2 / (2t), so tiles are visited
// by increasing lower bound and the scan stops once the bound reaches the
// best value. Inside a tile members are sorted by value.
class ShiftKernel {
 public:
  explicit ShiftKernel(const ScalarField& f) : metric_(f.space()), values_(f.values()) {
    const SampledSpace& s = f.space();
    bool any = false;
    for (double v : values_) {
      if (v == -kInf) throw ShiftError("hj_shift: -inf value makes the shift ill-posed");
      any = any || std::isfinite(v);
    }
    if (!any) throw ShiftError("hj_shift: field is +inf everywhere, shift undefined");

    const int tile_cols = (s.cols() + kTile - 1) / kTile;
    const int tile_rows = (s.rows() + kTile - 1) / kTile;
    std::vector<std::vector<std::size_t>> tiles(static_cast<std::size_t>(tile_rows * tile_cols));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) continue;
      tiles[static_cast<std::size_t>((s.row_of(i) / kTile) * tile_cols + s.col_of(i) / kTile)].push_back(i);
    }
    for (std::size_t k = 0; k < tiles.size(); ++k) {
      auto& members = tiles[k];
      if (members.empty()) continue;
      const double mid_row = (static_cast<int>(k) / tile_cols) * kTile + 0.5 * (kTile - 1);
      const double mid_col = (static_cast<int>(k) % tile_cols) * kTile + 0.5 * (kTile - 1);
      std::size_t centre = members.front();
      double best = kInf;
      for (auto m : members) {
        const double dr = s.row_of(m) - mid_row;
        const double dc = s.col_of(m) - mid_col;
        if (dr * dr + dc * dc < best) {
          best = dr * dr + dc * dc;
          centre = m;
        }
      }
      Tile tile;
      tile.centre = centre;
      for (auto m : members) tile.radius = std::max(tile.radius, metric_.distance(centre, m));
      tile.radius += 1e-12 * (1.0 + tile.radius);
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return values_[a] < values_[b] || (values_[a] == values_[b] && a < b);
      });
      tile.fmin = values_[members.front()];
      tile.members = std::move(members);
      tiles_.push_back(std::move(tile));
    }
  }

  const NodeMetric& metric() const { return metric_; }

  double at(const NodeMetric::Entry& x, double t) const {
    const double scale = 0.5 / t;
    std::vector<std::pair<double, double>> order;  // (lower bound, tile gap)
    std::vector<std::size_t> index(tiles_.size());
    order.reserve(tiles_.size());
    for (std::size_t k = 0; k < tiles_.size(); ++k) {
      const double gap = std::max(0.0, metric_.distance(x, tiles_[k].centre) - tiles_[k].radius);
      order.emplace_back(tiles_[k].fmin + scale * gap * gap, gap);
      index[k] = k;
    }
    std::sort(index.begin(), index.end(), [&](std::size_t a, std::size_t b) {
      return order[a].first < order[b].first || (order[a].first == order[b].first && a < b);
    });
    double best = kInf;
    for (auto k : index) {
      if (order[k].first >= best) break;
      const double floor = scale * order[k].second * order[k].second;
      for (auto y : tiles_[k].members) {
        const double fy = values_[y];
        if (fy + floor >= best) break;
        const double d = metric_.distance(x, y);
        best = std::min(best, fy + scale * d * d);
      }
    }
    return best;
  }

 private:
  struct Tile {
    std::size_t centre = 0;
    double radius = 0.0;
    double fmin = 0.0;
    std::vector<std::size_t> members;
  };

  NodeMetric metric_;
  std::vector<double> values_;
  std::vector<Tile> tiles_;
};

}  // namespace detail

ScalarField::ScalarField(SampledSpacePtr space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_) throw PreconditionError("scalar field: missing sampled space");
  if (values_.size() != space_->size()) throw PreconditionError("scalar field: size does not match node count");
  bool any = false;
  for (double v : values_) {
    if (std::isnan(v)) throw PreconditionError("scalar field: NaN value");
    any = any || std::isfinite(v);
  }
  if (!any) throw ShiftError("scalar field: no finite value");
}

ScalarField ScalarField::from_function(SampledSpacePtr space, const std::function<double(const Point&)>& f) {
  if (!space) throw PreconditionError("scalar field: missing sampled space");
  std::vector<double> values(space->size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(space->node(i));
  return {std::move(space), std::move(values)};
}

ScalarField ScalarField::negated() const {
  std::vector<double> v(values_.size());
  std::transform(values_.begin(), values_.end(), v.begin(), [](double x) { return -x; });
  return {space_, std::move(v)};
}

ScalarField hj_shift(const ScalarField& f, double t) {
  check_time(t, "hj_shift");
  const detail::ShiftKernel kernel(f);
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernel.at(kernel.metric().node(i), t);
  return {f.space_ptr(), std::move(out)};
}

double hj_value_at(const ScalarField& f, double t, const Point& p) {
  check_time(t, "hj_value_at");
  const detail::ShiftKernel kernel(f);
  return kernel.at(kernel.metric().entry(p), t);
}

double semigroup_defect(const ScalarField& f, double t0, double t1) {
  check_time(t0, "semigroup_defect");
  check_time(t1, "semigroup_defect");
  const ScalarField composed = hj_shift(hj_shift(f, t0), t1);
  const ScalarField direct = hj_shift(f, t0 + t1);
  double defect = -kInf;
  for (std::size_t i = 0; i < f.size(); ++i) defect = std::max(defect, composed[i] - direct[i]);
  return defect;
}

ShiftFamily::ShiftFamily(ScalarField base, std::vector<double> times)
    : base_(std::move(base)), times_(std::move(times)) {
  for (double t : times_) {
    if (!(t > 0.0 && t <= 1.0)) throw PreconditionError("shift family: times must lie in (0, 1]");
  }
}

const ScalarField& ShiftFamily::at(double t) const {
  if (std::find(times_.begin(), times_.end(), t) == times_.end()) {
    throw PreconditionError("shift family: time " + format_double(t) + " not in the grid");
  }
  auto it = cache_.find(t);
  if (it == cache_.end()) it = cache_.emplace(t, hj_shift(base_, t)).first;
  return it->second;
}

double ShiftFamily::value_at(double t, const Point& p) const {
  check_time(t, "shift family");
  if (!kernel_) kernel_ = std::make_shared<const detail::ShiftKernel>(base_);
  return kernel_->at(kernel_->metric().entry(p), t);
}

Point random_point(const ModelSpace& space, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  switch (space.kind()) {
    case SpaceKind::euclidean_box:
      if (space.dim() == 1) return {rng.uniform(0.0, space.side()), 0.0};
      [[fallthrough]];
    case SpaceKind::flat_torus:
      return {rng.uniform(0.0, space.side()), rng.uniform(0.0, space.side())};
    case SpaceKind::round_sphere:
      return {std::asin(rng.uniform(-1.0, 1.0)), rng.uniform(-pi, pi)};
    case SpaceKind::flat_cone:
      return {space.radial_cutoff() * std::sqrt(rng.uniform()), rng.uniform(0.0, space.total_angle())};
    case SpaceKind::hyperbolic_disk: {
      const double big = space.chart_radius();
      while (true) {
        const double r = big * std::sqrt(rng.uniform());
        const double a = rng.uniform(0.0, 2.0 * pi);
        const double accept = (1.0 - big * big) / (1.0 - r * r);
        if (rng.uniform() < accept * accept) return {r * std::cos(a), r * std::sin(a)};
      }
    }
  }
  return {};
}

std::vector<GeodesicSegment> random_segments(const ModelSpace& space, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GeodesicSegment> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  while (static_cast<int>(out.size()) < count) {
    const Point a = random_point(space, rng);
    const Point b = random_point(space, rng);
    if (space.kind() == SpaceKind::round_sphere && space.distance(a, b) > 0.9 * std::numbers::pi * space.radius()) {
      continue;
    }
    out.emplace_back(a, b);
  }
  return out;
}

ScalarField random_lipschitz_field(const SampledSpacePtr& space, std::uint64_t seed) {
  if (!space) throw PreconditionError("random field: missing sampled space");
  Rng rng(seed);
  std::vector<std::pair<Point, double>> terms;
  for (int k = 0; k < 4; ++k) {
    const Point c = random_point(space->space(), rng);
    terms.emplace_back(c, rng.uniform(-0.5, 0.5));
  }
  const ModelSpace& m = space->space();
  return ScalarField::from_function(space, [&](const Point& p) {
    double v = 0.0;
    for (const auto& [c, a] : terms) v += a * m.distance(p, c);
    return v;
  });
}

FamilyConcavityReport family_concavity_check(const ShiftFamily& family, double t,
                                             const std::vector<GeodesicSegment>& segments, int points,
                                             double tolerance) {
  if (points < 3) throw PreconditionError("family_concavity_check: need at least 3 points per segment");
  if (std::find(family.times().begin(), family.times().end(), t) == family.times().end()) {
    throw PreconditionError("family_concavity_check: time not in the family grid");
  }
  FamilyConcavityReport report;
  report.t = t;
  report.segments = segments.size();
  report.points = points;
  report.tolerance = tolerance;
  report.max_second_difference = -kInf;
  const ModelSpace& space = family.base().space().space();
  std::vector<double> g(static_cast<std::size_t>(points));
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& [a, b] = segments[k];
    const double length = space.distance(a, b);
    for (int j = 0; j < points; ++j) {
      const double u = static_cast<double>(j) / (points - 1);
      const double s = u * length;
      g[static_cast<std::size_t>(j)] = family.value_at(t, space.geodesic_point(a, b, u)) - s * s / (2.0 * t);
    }
    for (std::size_t j = 1; j + 1 < g.size(); ++j) {
      const double second = g[j - 1] + g[j + 1] - 2.0 * g[j];
      if (second > report.max_second_difference) {
        report.max_second_difference = second;
        report.worst_segment = k;
      }
    }
  }
  report.pass = !(report.max_second_difference > tolerance);
  return report;
}

double potential_tolerance(const SampledSpace& space, double t) {
  const double h = space.grid_step();
  return h * h / (4.0 * t * (1.0 - t));
}

PotentialInterpolationReport potential_interpolation_check(const PotentialPair& pair,
                                                           const DynamicalCoupling& coupling, double t,
                                                           const PotentialCheckOptions& options) {
  if (!(t > 0.0 && t < 1.0)) throw PreconditionError("potential_interpolation_check: t must lie in (0, 1)");
  const SampledSpace& s = coupling.space();
  const ModelSpace& space = s.space();
  const ScalarField psi(coupling.space_ptr(), pair.psi);
  const ScalarField neg_phi = ScalarField(coupling.space_ptr(), pair.phi).negated();
  const ScalarField psi_t = hj_shift(psi, t);
  const ScalarField phi_t = hj_shift(neg_phi, 1.0 - t);
  const detail::ShiftKernel psi_kernel(psi);

  PotentialInterpolationReport report;
  report.t = t;
  report.tolerance = options.tolerance.value_or(potential_tolerance(s, t) + 1e-9);
  report.min_sum = kInf;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double sum = psi_t[i] + phi_t[i];
    if (sum < report.min_sum) {
      report.min_sum = sum;
      report.min_sum_node = i;
    }
  }
  const auto& rays = coupling.rays();
  for (std::size_t k = 0; k < rays.size(); ++k) {
    if (rays[k].mass < options.mass_floor) continue;
    ++report.checked_rays;
    const Point z = coupling.position(rays[k], t);
    const std::size_t node = s.snap(z);
    const double on_support = std::abs(psi_t[node] + phi_t[node]);
    if (!report.worst_support_ray || on_support > report.max_support_sum) {
      report.max_support_sum = on_support;
      report.worst_support_ray = k;
    }
    const double d = space.distance(s.node(rays[k].source), s.node(rays[k].target));
    const double expected = psi[rays[k].source] + t * 0.5 * d * d;
    const double err = std::abs(psi_kernel.at(psi_kernel.metric().entry(z), t) - expected);
    if (!report.worst_identity_ray || err > report.max_identity_error) {
      report.max_identity_error = err;
      report.worst_identity_ray = k;
    }
  }
  report.lower_bound_ok = report.min_sum >= -report.tolerance;
  report.support_ok = report.max_support_sum <= report.tolerance;
  report.identity_ok = report.max_identity_error <= options.identity_tolerance;
  report.pass = report.lower_bound_ok && report.support_ok && report.identity_ok;
  return report;
}

double reverse_contraction_factor(double t0, double t1) {
  const double r = (1.0 - t1) / (1.0 - t0);
  return (t0 / t1) * r * r;
}

ReverseContractionReport reverse_contraction_check(const DynamicalCoupling& coupling, double t0, double t1,
                                                   int pairs, std::uint64_t seed, double tolerance,
                                                   double mass_floor) {
  if (!(0.0 < t0 && t0 < t1 && t1 < 1.0)) {
    throw PreconditionError("reverse_contraction_check: need 0 < t0 < t1 < 1");
  }
  const auto& rays = coupling.rays();
  std::vector<std::size_t> eligible;
  for (std::size_t k = 0; k < rays.size(); ++k) {
    if (rays[k].mass >= mass_floor) eligible.push_back(k);
  }
  const bool distinct = std::any_of(eligible.begin(), eligible.end(), [&](std::size_t k) {
    return rays[k].source != rays[eligible.front()].source || rays[k].target != rays[eligible.front()].target;
  });
  if (eligible.size() < 2 || !distinct) {
    throw PreconditionError("reverse_contraction_check: need two rays with distinct trajectories");
  }

  ReverseContractionReport report;
  report.t0 = t0;
  report.t1 = t1;
  report.factor = reverse_contraction_factor(t0, t1);
  report.tolerance = tolerance;
  report.max_shortfall = -kInf;
  const ModelSpace& space = coupling.space().space();
  Rng rng(seed);
  while (static_cast<int>(report.pairs) < pairs) {
    const std::size_t a = eligible[rng.below(eligible.size())];
    const std::size_t b = eligible[rng.below(eligible.size())];
    if (rays[a].source == rays[b].source && rays[a].target == rays[b].target) continue;
    ++report.pairs;
    const double l0 = space.distance(coupling.position(rays[a], t0), coupling.position(rays[b], t0));
    const double l1 = space.distance(coupling.position(rays[a], t1), coupling.position(rays[b], t1));
    const double shortfall = report.factor * l0 - l1;
    if (shortfall > report.max_shortfall) {
      report.max_shortfall = shortfall;
      report.worst_pair = std::pair{a, b};
    }
  }
  report.pass = !(report.max_shortfall > tolerance);
  return report;
}

void write_field_csv(std::ostream& out, const ScalarField& f) {
  out << "node,value\n";
  for (std::size_t i = 0; i < f.size(); ++i) out << i << ',' << format_double(f[i]) << '\n';
}

}  // namespace cdlab
