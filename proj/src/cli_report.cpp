#include "cdlab/cli_report.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "cdlab/errors.hpp"
#include "cdlab/gradient_flow.hpp"
#include "cdlab/hamilton_jacobi.hpp"
#include "cdlab/random.hpp"
#include "format.hpp"

namespace cdlab {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream offsets keep the instance families of one run independent.
constexpr std::uint64_t kMetricStream = 0x5a;
constexpr std::uint64_t kFieldStream = 1000;
constexpr std::uint64_t kPairStream = 2000;
constexpr std::uint64_t kFlowFieldStream = 3000;
constexpr std::uint64_t kCurveStream = 4000;
constexpr std::uint64_t kLaplacianStream = 5000;

constexpr int kRefinedTrials = 5;
constexpr double kMarginalTolerance = 1e-10;
constexpr double kSemigroupFloor = -1e-12;
constexpr double kVolumeTolerance = 1e-6;
constexpr double kMetricTolerance = 1e-12;

[[noreturn]] void field_error(const std::string& path, const std::string& message) {
  throw ConfigError("config field '" + path + "': " + message);
}

double read_number(const json& obj, const std::string& key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) field_error(path + key, "expected a number");
  return v.get<double>();
}

int read_int(const json& obj, const std::string& key, const std::string& path, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) field_error(path + key, "expected an integer");
  const auto n = v.get<std::int64_t>();
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    field_error(path + key, "integer out of range");
  }
  return static_cast<int>(n);
}

std::string read_string(const json& obj, const std::string& key, const std::string& path, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) field_error(path + key, "expected a string");
  return v.get<std::string>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      field_error(path + key, "unknown field");
    }
  }
}

Suite suite_from_string(const std::string& name, const std::string& path) {
  for (auto s : {Suite::space, Suite::transport, Suite::cd, Suite::hj, Suite::flow, Suite::all}) {
    if (to_string(s) == name) return s;
  }
  field_error(path, "unknown suite '" + name + "' (expected space, transport, cd, hj, flow or all)");
}

SpaceSpec space_from_json(const json& v, const std::string& path) {
  SpaceSpec spec;
  if (v.is_string()) {
    spec.kind = v.get<std::string>();
  } else if (v.is_object()) {
    reject_unknown(v, {"kind", "dim", "side", "radius", "total_angle", "radial_cutoff", "chart_radius"}, path + ".");
    if (!v.contains("kind")) field_error(path + ".kind", "missing");
    spec.kind = read_string(v, "kind", path + ".", spec.kind);
    spec.dim = read_int(v, "dim", path + ".", spec.dim);
    spec.side = read_number(v, "side", path + ".", spec.side);
    spec.radius = read_number(v, "radius", path + ".", spec.radius);
    spec.total_angle = read_number(v, "total_angle", path + ".", spec.total_angle);
    spec.radial_cutoff = read_number(v, "radial_cutoff", path + ".", spec.radial_cutoff);
    spec.chart_radius = read_number(v, "chart_radius", path + ".", spec.chart_radius);
  } else {
    field_error(path, "expected a space name or object");
  }
  if (!space_kind_from_string(spec.kind)) field_error(path + ".kind", "unknown space kind '" + spec.kind + "'");
  return spec;
}

json space_to_json(const SpaceSpec& s) {
  json j{{"kind", s.kind}};
  switch (*space_kind_from_string(s.kind)) {
    case SpaceKind::euclidean_box:
      j["dim"] = s.dim;
      j["side"] = s.side;
      break;
    case SpaceKind::flat_torus:
      j["side"] = s.side;
      break;
    case SpaceKind::round_sphere:
      j["radius"] = s.radius;
      break;
    case SpaceKind::flat_cone:
      j["total_angle"] = s.total_angle;
      j["radial_cutoff"] = s.radial_cutoff;
      break;
    case SpaceKind::hyperbolic_disk:
      j["chart_radius"] = s.chart_radius;
      break;
  }
  return j;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json point_json(const Point& p) { return json::array({p.c0, p.c1}); }

bool selected(const ExperimentConfig& c, Suite s) { return c.suite == Suite::all || c.suite == s; }

// ---------------------------------------------------------------------------
// Suites

void space_checks(SuiteReport& out, const ExperimentConfig& config, const ModelSpace& space) {
  const int res = config.resolutions.front();
  {
    Stopwatch clock;
    const auto s = SampledSpace::sample(space, res);
    const double exact = space.analytic_volume();
    CheckResult c{"space.volume", space.name()};
    c.value = std::abs(s->total_volume() - exact) / exact;
    c.tolerance = kVolumeTolerance;
    c.pass = c.value <= c.tolerance;
    c.witness = {{"resolution", res}, {"sampled", s->total_volume()}, {"analytic", exact}};
    c.seconds = clock.seconds();
    out.checks.push_back(std::move(c));
  }
  {
    Stopwatch clock;
    const auto s = SampledSpace::sample(space, res);
    Rng rng(derive_seed(config.seed, kMetricStream));
    CheckResult c{"space.metric", space.name()};
    c.tolerance = kMetricTolerance;
    c.value = 0.0;
    for (int k = 0; k < 50; ++k) {
      const std::size_t x = rng.below(s->size());
      const std::size_t y = rng.below(s->size());
      const std::size_t z = rng.below(s->size());
      const double dxy = space.distance(s->node(x), s->node(y));
      const double dyx = space.distance(s->node(y), s->node(x));
      const double dyz = space.distance(s->node(y), s->node(z));
      const double dxz = space.distance(s->node(x), s->node(z));
      const double worst = std::max({std::abs(dxy - dyx), space.distance(s->node(x), s->node(x)), dxz - dxy - dyz});
      if (worst > c.value || k == 0) {
        c.value = worst;
        c.witness = {{"resolution", res}, {"nodes", {x, y, z}}};
      }
    }
    c.pass = c.value <= c.tolerance;
    c.seconds = clock.seconds();
    out.checks.push_back(std::move(c));
  }
}

struct TrialTallies {
  double max_gap = -kInf;
  double max_marginal = -kInf;
  std::size_t gap_trial = 0;
  std::size_t marginal_trial = 0;
  std::vector<std::string> errors;

  double potential_excess = -kInf;
  bool potential_pass = true;
  json potential_witness = json::object();

  double reverse_shortfall = -kInf;
  bool reverse_pass = true;
  json reverse_witness = json::object();
};

void trial_checks(SuiteReport& out, const ExperimentConfig& config, const ModelSpace& space) {
  const int res = config.resolutions.front();
  const bool hyperbolic = space.kind() == SpaceKind::hyperbolic_disk;
  const bool want_hj = selected(config, Suite::hj);
  const bool want_cd = selected(config, Suite::cd);
  const bool want_transport = selected(config, Suite::transport);
  if (!want_hj && !want_cd && !want_transport) return;

  Stopwatch clock;
  TrialTallies tally;
  double hj_seconds = 0.0;
  CdOptions options;
  options.m = config.m;
  options.t_points = config.t_points;
  options.tol_constant = config.tolerances.cd_constant;
  options.directed = hyperbolic;
  options.inspect = [&](const TrialSpec& spec, const TrialPipeline& p) {
    if (p.potentials.gap > tally.max_gap) {
      tally.max_gap = p.potentials.gap;
      tally.gap_trial = spec.index;
    }
    const double marginal = marginal_error(p.plan, p.mu0, p.mu1);
    if (marginal > tally.max_marginal) {
      tally.max_marginal = marginal;
      tally.marginal_trial = spec.index;
    }
    if (!want_hj) return;
    Stopwatch hj_clock;
    for (double t : {0.25, 0.5, 0.75}) {
      const auto r = potential_interpolation_check(p.potentials, p.coupling, t);
      const double excess = std::max({r.max_support_sum - r.tolerance, -r.min_sum - r.tolerance,
                                      r.max_identity_error - PotentialCheckOptions{}.identity_tolerance});
      if (!r.pass) tally.potential_pass = false;
      if (excess > tally.potential_excess) {
        tally.potential_excess = excess;
        tally.potential_witness = {{"seed", config.seed},         {"trial", spec.index},
                                   {"t", t},                      {"tolerance", r.tolerance},
                                   {"min_sum", r.min_sum},        {"min_sum_node", r.min_sum_node},
                                   {"max_support_sum", r.max_support_sum},
                                   {"max_identity_error", r.max_identity_error}};
        if (r.worst_support_ray) tally.potential_witness["ray"] = *r.worst_support_ray;
      }
    }
    try {
      const auto r = reverse_contraction_check(p.coupling, 0.25, 0.5, config.pairs, derive_seed(config.seed, kPairStream + spec.index),
                                               config.tolerances.reverse_contraction);
      if (!r.pass) tally.reverse_pass = false;
      if (r.max_shortfall > tally.reverse_shortfall) {
        tally.reverse_shortfall = r.max_shortfall;
        tally.reverse_witness = {{"seed", config.seed}, {"trial", spec.index}, {"t0", 0.25}, {"t1", 0.5}};
        if (r.worst_pair) tally.reverse_witness["rays"] = {r.worst_pair->first, r.worst_pair->second};
      }
    } catch (const PreconditionError& e) {
      tally.reverse_pass = false;
      tally.reverse_witness = {{"seed", config.seed}, {"trial", spec.index}, {"error", e.what()}};
    }
    hj_seconds += hj_clock.seconds();
  };
  const auto verdict = cd_verdict(space, config.trials, res, config.seed, options);
  const double total = clock.seconds();
  for (const auto& trial : verdict.trials) {
    if (trial.error) tally.errors.push_back("trial " + std::to_string(trial.spec.index) + ": " + *trial.error);
  }

  if (want_transport) {
    CheckResult gap{"transport.dual_gap", space.name()};
    gap.value = tally.max_gap;
    gap.tolerance = config.tolerances.dual_gap;
    gap.pass = tally.errors.empty() && gap.value <= gap.tolerance;
    gap.witness = {{"seed", config.seed}, {"trial", tally.gap_trial}, {"resolution", res}, {"errors", tally.errors}};
    out.checks.push_back(std::move(gap));
    CheckResult marg{"transport.marginals", space.name()};
    marg.value = tally.max_marginal;
    marg.tolerance = kMarginalTolerance;
    marg.pass = tally.errors.empty() && marg.value <= marg.tolerance;
    marg.witness = {{"seed", config.seed}, {"trial", tally.marginal_trial}, {"resolution", res}};
    out.checks.push_back(std::move(marg));
  }

  if (want_cd) {
    Stopwatch refine_clock;
    for (const auto& trial : verdict.trials) {
      if (!trial.error) {
        out.profiles.push_back({space.name(), res, trial.spec.index, trial.report.t_grid, trial.report.theta});
      }
    }
    CheckResult c{hyperbolic ? "cd.negative_control" : "cd.concavity", space.name()};
    c.value = verdict.max_deficit;
    c.tolerance = hyperbolic ? 2.0 * verdict.tolerance : verdict.tolerance;
    c.pass = hyperbolic ? verdict.max_deficit > c.tolerance : verdict.pass;
    c.witness = {{"seed", config.seed}, {"resolution", res}, {"m", config.m}, {"errors", tally.errors}};
    if (verdict.worst_trial) {
      const auto& w = verdict.trials[*verdict.worst_trial];
      c.witness["trial"] = w.spec.index;
      c.witness["family"] = w.spec.family;
      c.witness["source"] = describe(w.spec.source);
      c.witness["target"] = describe(w.spec.target);
      c.witness["worst_t"] = w.report.t_grid[w.report.worst_index];
    }
    std::optional<CheckResult> refinement;
    if (config.resolutions.size() > 1) {
      const int fine = config.resolutions[1];
      const auto count = static_cast<std::size_t>(hyperbolic ? 1 : kRefinedTrials);
      const auto ref = refinement_check(verdict, space, fine, count, options);
      for (std::size_t k = 0; k < ref.trials.size(); ++k) {
        out.profiles.push_back({space.name(), fine, verdict.trials[ref.trials[k]].spec.index, ref.profiles[k].t_grid,
                                ref.profiles[k].theta});
      }
      if (hyperbolic) {
        const bool positive = !ref.fine.empty() && ref.fine.front() > 0.0;
        c.pass = c.pass && positive;
        c.witness["refined_resolution"] = fine;
        c.witness["refined_deficit"] = ref.fine.empty() ? json(nullptr) : json(ref.fine.front());
      } else {
        CheckResult r{"cd.refinement", space.name()};
        r.value = -kInf;
        for (std::size_t k = 0; k < ref.trials.size(); ++k) r.value = std::max(r.value, ref.fine[k] - ref.coarse[k]);
        if (ref.trials.empty()) r.value = 0.0;
        r.tolerance = 0.0;
        r.pass = ref.pass;
        r.witness = {{"seed", config.seed},
                     {"resolution", fine},
                     {"trials", ref.trials},
                     {"coarse", ref.coarse},
                     {"fine", ref.fine},
                     {"fine_tolerance", ref.tolerance},
                     {"strictly_decreasing", ref.strictly_decreasing}};
        r.seconds = refine_clock.seconds();
        refinement = std::move(r);
      }
    }
    c.seconds = total - hj_seconds;
    out.checks.push_back(std::move(c));
    if (refinement) out.checks.push_back(std::move(*refinement));
  }

  if (want_hj) {
    CheckResult pot{"hj.potential", space.name()};
    pot.value = tally.potential_excess;
    pot.tolerance = 0.0;
    pot.pass = tally.potential_pass && tally.errors.empty();
    pot.witness = tally.potential_witness;
    pot.seconds = hj_seconds;
    out.checks.push_back(std::move(pot));
    CheckResult rev{"hj.reverse_contraction", space.name()};
    rev.value = tally.reverse_shortfall;
    rev.tolerance = config.tolerances.reverse_contraction;
    rev.pass = tally.reverse_pass && tally.errors.empty();
    rev.witness = tally.reverse_witness;
    rev.witness["pairs_per_trial"] = config.pairs;
    out.checks.push_back(std::move(rev));
  }
}

void semigroup_checks(SuiteReport& out, const ExperimentConfig& config, const ModelSpace& space) {
  Stopwatch clock;
  CheckResult c{"hj.semigroup", space.name()};
  c.tolerance = kSemigroupFloor;
  c.value = kInf;
  const bool refine = config.resolutions.size() > 1;
  std::vector<std::size_t> not_decreasing;
  for (int f = 0; f < config.fields; ++f) {
    const auto field_seed = derive_seed(config.seed, kFieldStream + static_cast<std::uint64_t>(f));
    double previous = kInf;
    for (std::size_t r = 0; r < (refine ? 2u : 1u); ++r) {
      const int res = config.resolutions[r];
      const auto s = SampledSpace::sample(space, res);
      const double defect = semigroup_defect(random_lipschitz_field(s, field_seed), 0.2, 0.3);
      out.defects.push_back({space.name(), static_cast<std::size_t>(f), res, defect});
      if (defect < c.value) {
        c.value = defect;
        c.witness = {{"seed", config.seed}, {"field", f}, {"field_seed", field_seed}, {"resolution", res}};
      }
      if (r == 1 && !(defect < previous)) not_decreasing.push_back(static_cast<std::size_t>(f));
      previous = defect;
    }
  }
  if (config.fields == 0) c.value = 0.0;
  c.witness["t0"] = 0.2;
  c.witness["t1"] = 0.3;
  c.witness["not_decreasing"] = not_decreasing;
  c.pass = c.value >= c.tolerance && not_decreasing.empty();
  c.seconds = clock.seconds();
  out.checks.push_back(std::move(c));
}

void flow_checks(SuiteReport& out, const ExperimentConfig& config, const ModelSpace& space) {
  const int res = config.resolutions.front();
  const auto s = SampledSpace::sample(space, res);
  {
    Stopwatch clock;
    const auto family = hj_family(random_lipschitz_field(s, derive_seed(config.seed, kFlowFieldStream)), 2.0);
    FlowOptions flow;
    flow.step = config.flow_step;
    Rng rng(derive_seed(config.seed, kCurveStream));
    CheckResult c{"flow.contraction", space.name()};
    c.tolerance = config.tolerances.contraction_steps * flow.step;
    c.value = -kInf;
    int done = 0;
    int truncated = 0;
    const int attempts = 20 * std::max(config.pairs, 1);
    for (int k = 0; k < attempts && done < config.pairs; ++k) {
      const Point a0 = random_point(space, rng);
      const Point b0 = random_point(space, rng);
      const auto a = gradient_curve(family, a0, 0.25, 0.5, flow);
      const auto b = gradient_curve(family, b0, 0.25, 0.5, flow);
      if (a.truncated || b.truncated) {
        ++truncated;
        continue;
      }
      const auto r = contraction_check(family, a, b, 0.25, 0.5, c.tolerance);
      if (r.excess > c.value) {
        c.value = r.excess;
        c.witness = {{"seed", config.seed}, {"pair", done}, {"start_a", point_json(a0)}, {"start_b", point_json(b0)},
                     {"bound", r.bound}, {"distance0", r.distance0}, {"distance1", r.distance1}};
      }
      ++done;
    }
    if (done == 0) c.value = 0.0;
    c.witness["pairs"] = done;
    c.witness["truncated"] = truncated;
    c.witness["resolution"] = res;
    c.pass = done == config.pairs && c.value <= c.tolerance;
    c.seconds = clock.seconds();
    out.checks.push_back(std::move(c));
  }
  {
    Stopwatch clock;
    CheckResult c{"flow.laplacian", space.name()};
    c.value = -kInf;
    c.pass = true;
    const auto base = random_lipschitz_field(s, derive_seed(config.seed, kLaplacianStream));
    const ShiftFamily family(base, {0.25, 0.5});
    LaplacianOptions options;
    options.seed = derive_seed(config.seed, kLaplacianStream + 1);
    options.constant = config.tolerances.laplacian_constant;
    for (double t : {0.25, 0.5}) {
      try {
        const auto r = laplacian_bound_check(
            *s, [&](const Point& p) { return family.value_at(t, p); }, 1.0 / t, config.m, options);
        c.tolerance = r.tolerance;
        if (!r.pass) c.pass = false;
        if (r.max_excess > c.value) {
          c.value = r.max_excess;
          c.witness = {{"seed", config.seed}, {"t", t}, {"resolution", res}, {"nodes", r.nodes}};
          if (r.worst_node) c.witness["node"] = *r.worst_node;
        }
      } catch (const PreconditionError& e) {
        c.pass = false;
        c.witness = {{"seed", config.seed}, {"t", t}, {"error", e.what()}};
      }
    }
    c.seconds = clock.seconds();
    out.checks.push_back(std::move(c));
  }
}

// Closed-form instances on the flat chart, independent of the configured spaces.
void closed_form_flow_checks(SuiteReport& out, const ExperimentConfig& config) {
  const std::string box = to_string(SpaceKind::euclidean_box);
  {
    Stopwatch clock;
    // f = |x|^2 / 2 in two dimensions: trace of Hess f_t is 2 / (1 + t).
    const SmoothField iso{[](const Point& p) { return 0.5 * (p.c0 * p.c0 + p.c1 * p.c1); },
                          [](const Point& p) { return ChartVector{p.c0, p.c1}; },
                          [](const Point&) { return std::array<double, 3>{1.0, 0.0, 1.0}; }};
    Curve ray;
    ray.step = config.flow_step;
    const int n = static_cast<int>(std::lround(0.9 / ray.step));
    for (int k = 0; k <= n; ++k) {
      const double t = 0.05 + 0.9 * k / n;
      ray.times.push_back(t);
      ray.points.push_back({0.1 * (1.0 + t), 0.2 * (1.0 + t)});
    }
    const auto r = riccati_check(iso, ray, 2);
    CheckResult c{"flow.riccati", box};
    c.value = 0.0;
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      c.value = std::max(c.value, std::abs(r.trace[k] - 2.0 / (1.0 + r.times[k])));
    }
    c.tolerance = config.tolerances.riccati;
    c.pass = r.pass && c.value <= c.tolerance;
    c.witness = {{"m", 2}, {"fd_step", RiccatiOptions{}.fd_step}, {"weak_values", r.weak_values}};
    c.seconds = clock.seconds();
    out.checks.push_back(std::move(c));
  }
  {
    Stopwatch clock;
    // -|x - c|^2 / 2 contracts toward the centre; v(t) = e^{2 (t1 - t)} |E|.
    const auto family = static_family(
        ModelSpace::euclidean_box(1.0),
        [](const Point& p) { return -0.5 * ((p.c0 - 0.5) * (p.c0 - 0.5) + (p.c1 - 0.5) * (p.c1 - 0.5)); }, -1.0, 1.0);
    VolumeEvolutionOptions options;
    options.flow.step = config.flow_step;
    options.tolerance = config.tolerances.volume;
    const auto r = volume_evolution_check(family, {0.4, 0.6, 0.4, 0.6}, {0.2, 0.8, 0.2, 0.8}, 0.0, 0.5, 240, options);
    CheckResult c{"flow.volume", box};
    c.value = r.relative_mismatch;
    c.tolerance = r.tolerance;
    c.pass = r.pass;
    c.witness = {{"volume_change", r.volume_change}, {"integral", r.integral}, {"boundary_flag", r.boundary_flag}};
    c.seconds = clock.seconds();
    out.checks.push_back(std::move(c));
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file << content;
  if (!file) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

std::string to_string(Suite suite) {
  switch (suite) {
    case Suite::space:
      return "space";
    case Suite::transport:
      return "transport";
    case Suite::cd:
      return "cd";
    case Suite::hj:
      return "hj";
    case Suite::flow:
      return "flow";
    case Suite::all:
      return "all";
  }
  return "all";
}

ModelSpace SpaceSpec::build() const {
  const auto k = space_kind_from_string(kind);
  if (!k) throw ConfigError("unknown space kind '" + kind + "'");
  switch (*k) {
    case SpaceKind::euclidean_box:
      return ModelSpace::euclidean_box(side, dim);
    case SpaceKind::flat_torus:
      return ModelSpace::flat_torus(side);
    case SpaceKind::round_sphere:
      return ModelSpace::round_sphere(radius);
    case SpaceKind::flat_cone:
      return ModelSpace::flat_cone(total_angle, radial_cutoff);
    case SpaceKind::hyperbolic_disk:
      return ModelSpace::hyperbolic_disk(chart_radius);
  }
  throw ConfigError("unknown space kind '" + kind + "'");
}

std::vector<SpaceSpec> ExperimentConfig::default_spaces() {
  std::vector<SpaceSpec> out(4);
  out[0].kind = "euclidean_box";
  out[1].kind = "flat_torus";
  out[2].kind = "round_sphere";
  out[3].kind = "flat_cone";
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  reject_unknown(doc,
                 {"spaces", "resolutions", "m", "t_points", "trials", "fields", "pairs", "flow_step", "seed", "suite",
                  "out", "format", "tolerances"},
                 "");
  ExperimentConfig c;
  if (doc.contains("spaces")) {
    const auto& spaces = doc.at("spaces");
    if (!spaces.is_array()) field_error("spaces", "expected an array");
    for (std::size_t i = 0; i < spaces.size(); ++i) {
      c.spaces.push_back(space_from_json(spaces[i], "spaces[" + std::to_string(i) + "]"));
    }
  } else {
    c.spaces = default_spaces();
  }
  if (doc.contains("resolutions")) {
    const auto& r = doc.at("resolutions");
    if (!r.is_array()) field_error("resolutions", "expected an array of integers");
    c.resolutions.clear();
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!r[i].is_number_integer()) field_error("resolutions[" + std::to_string(i) + "]", "expected an integer");
      c.resolutions.push_back(r[i].get<int>());
    }
  }
  c.m = read_int(doc, "m", "", c.m);
  c.t_points = read_int(doc, "t_points", "", c.t_points);
  c.trials = read_int(doc, "trials", "", c.trials);
  c.fields = read_int(doc, "fields", "", c.fields);
  c.pairs = read_int(doc, "pairs", "", c.pairs);
  c.flow_step = read_number(doc, "flow_step", "", c.flow_step);
  if (!doc.contains("seed")) field_error("seed", "missing (seeds are never taken from the environment)");
  if (!doc.at("seed").is_number_unsigned()) field_error("seed", "expected a nonnegative integer");
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.suite = suite_from_string(read_string(doc, "suite", "", to_string(c.suite)), "suite");
  c.out = read_string(doc, "out", "", c.out);
  c.format = read_string(doc, "format", "", c.format);
  if (doc.contains("tolerances")) {
    const auto& t = doc.at("tolerances");
    if (!t.is_object()) field_error("tolerances", "expected an object");
    reject_unknown(t,
                   {"cd_constant", "dual_gap", "reverse_contraction", "contraction_steps", "laplacian_constant",
                    "riccati", "volume"},
                   "tolerances.");
    auto& tol = c.tolerances;
    tol.cd_constant = read_number(t, "cd_constant", "tolerances.", tol.cd_constant);
    tol.dual_gap = read_number(t, "dual_gap", "tolerances.", tol.dual_gap);
    tol.reverse_contraction = read_number(t, "reverse_contraction", "tolerances.", tol.reverse_contraction);
    tol.contraction_steps = read_number(t, "contraction_steps", "tolerances.", tol.contraction_steps);
    tol.laplacian_constant = read_number(t, "laplacian_constant", "tolerances.", tol.laplacian_constant);
    tol.riccati = read_number(t, "riccati", "tolerances.", tol.riccati);
    tol.volume = read_number(t, "volume", "tolerances.", tol.volume);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line and column.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError("config: JSON syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(column) + ": " + e.what());
  }
  return from_json(doc);
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream text;
  text << file.rdbuf();
  return parse(text.str());
}

void ExperimentConfig::validate() const {
  if (spaces.empty()) field_error("spaces", "at least one space is required");
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    try {
      spaces[i].build();
    } catch (const Error& e) {
      field_error("spaces[" + std::to_string(i) + "]", e.what());
    }
  }
  if (resolutions.empty()) field_error("resolutions", "at least one resolution is required");
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    if (resolutions[i] < 2) field_error("resolutions[" + std::to_string(i) + "]", "must be at least 2");
  }
  if (m < 1) field_error("m", "must be at least 1");
  if (t_points < 3) field_error("t_points", "must be at least 3");
  if (trials < 0) field_error("trials", "must be nonnegative");
  if (fields < 0) field_error("fields", "must be nonnegative");
  if (pairs < 0) field_error("pairs", "must be nonnegative");
  if (!(flow_step > 0.0 && flow_step < 0.25)) field_error("flow_step", "must lie in (0, 0.25)");
  if (format != "json" && format != "csv") field_error("format", "expected json or csv");
  const std::array<std::pair<const char*, double>, 7> tols{{{"cd_constant", tolerances.cd_constant},
                                                            {"dual_gap", tolerances.dual_gap},
                                                            {"reverse_contraction", tolerances.reverse_contraction},
                                                            {"contraction_steps", tolerances.contraction_steps},
                                                            {"laplacian_constant", tolerances.laplacian_constant},
                                                            {"riccati", tolerances.riccati},
                                                            {"volume", tolerances.volume}}};
  for (const auto& [name, value] : tols) {
    if (!(value > 0.0) || !std::isfinite(value)) field_error(std::string("tolerances.") + name, "must be positive");
  }
}

json ExperimentConfig::to_json() const {
  json spaces_json = json::array();
  for (const auto& s : spaces) spaces_json.push_back(space_to_json(s));
  return {{"spaces", spaces_json},
          {"resolutions", resolutions},
          {"m", m},
          {"t_points", t_points},
          {"trials", trials},
          {"fields", fields},
          {"pairs", pairs},
          {"flow_step", flow_step},
          {"seed", seed},
          {"suite", to_string(suite)},
          {"out", out},
          {"format", format},
          {"tolerances",
           {{"cd_constant", tolerances.cd_constant},
            {"dual_gap", tolerances.dual_gap},
            {"reverse_contraction", tolerances.reverse_contraction},
            {"contraction_steps", tolerances.contraction_steps},
            {"laplacian_constant", tolerances.laplacian_constant},
            {"riccati", tolerances.riccati},
            {"volume", tolerances.volume}}}};
}

bool SuiteReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

json SuiteReport::to_json(bool with_timings) const {
  json list = json::array();
  for (const auto& c : checks) {
    json j{{"name", c.name},   {"space", c.space},         {"pass", c.pass},
           {"value", c.value}, {"tolerance", c.tolerance}, {"witness", c.witness}};
    if (with_timings) j["seconds"] = c.seconds;
    list.push_back(std::move(j));
  }
  return {{"version", version},
          {"rng", rng},
          {"pass", pass()},
          {"config", config},
          {"checks", list},
          {"profiles", profiles.size()},
          {"defects", defects.size()}};
}

SuiteReport run(const ExperimentConfig& config) {
  config.validate();
  SuiteReport report;
  report.rng = Rng::kName;
  report.config = config.to_json();
  for (const auto& spec : config.spaces) {
    const ModelSpace space = spec.build();
    if (selected(config, Suite::space)) space_checks(report, config, space);
    if (config.trials == 0) continue;
    trial_checks(report, config, space);
    if (selected(config, Suite::hj)) semigroup_checks(report, config, space);
    if (selected(config, Suite::flow) && space.dim() == 2) flow_checks(report, config, space);
  }
  if (config.trials > 0 && selected(config, Suite::flow)) closed_form_flow_checks(report, config);
  return report;
}

void write_checks_csv(std::ostream& out, const SuiteReport& report) {
  out << "name,space,pass,value,tolerance\n";
  for (const auto& c : report.checks) {
    out << c.name << ',' << c.space << ',' << (c.pass ? 1 : 0) << ',' << format_double(c.value) << ','
        << format_double(c.tolerance) << '\n';
  }
}

void write_profiles_csv(std::ostream& out, const SuiteReport& report) {
  out << "space,resolution,trial,t,theta\n";
  for (const auto& p : report.profiles) {
    for (std::size_t i = 0; i < p.t.size(); ++i) {
      out << p.space << ',' << p.resolution << ',' << p.trial << ',' << format_double(p.t[i]) << ','
          << format_double(p.theta[i]) << '\n';
    }
  }
}

void write_defects_csv(std::ostream& out, const SuiteReport& report) {
  out << "space,field,resolution,defect\n";
  for (const auto& d : report.defects) {
    out << d.space << ',' << d.field << ',' << d.resolution << ',' << format_double(d.defect) << '\n';
  }
}

std::vector<std::filesystem::path> emit(const SuiteReport& report, const std::filesystem::path& dir,
                                        std::string_view format) {
  if (format != "json" && format != "csv") throw ConfigError("emit: format must be json or csv");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto put = [&](const char* name, const std::string& content) {
    written.push_back(dir / name);
    write_file(written.back(), content);
  };
  if (format == "json") {
    put("report.json", report.to_json().dump(2) + "\n");
  } else {
    std::ostringstream checks;
    write_checks_csv(checks, report);
    put("checks.csv", checks.str());
  }
  std::ostringstream theta;
  write_profiles_csv(theta, report);
  put("theta.csv", theta.str());
  std::ostringstream defects;
  write_defects_csv(defects, report);
  put("defects.csv", defects.str());
  return written;
}

}  // namespace cdlab
