#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdlab/interpolation.hpp"
#include "cdlab/transport.hpp"

namespace cdlab {

/// Sum over cells of rho^(1 - 1/m) * volume, i.e. sum of mass * rho^(-1/m).
double renyi_functional(const DiscreteMeasure& mu, int m);

struct ConcavityReport {
  std::vector<double> t_grid;
  std::vector<double> theta;
  /// max over interior i of (theta[i-1] + theta[i+1]) / 2 - theta[i]; positive
  /// values witness a concavity violation.
  double max_midpoint_deficit = 0.0;
  std::size_t worst_index = 0;
  std::optional<bool> verdict;
  double tolerance = 0.0;
  int resolution = 0;
  std::vector<std::string> errors;  // per-t failures, "t=<value>: <message>"
};

/// `points` equally spaced values from 0 to 1.
std::vector<double> uniform_t_grid(int points);

/// Theta(t) = sum over rays of mass * r_t^(-1/m) on `t_grid`.
ConcavityReport theta_profile(const DynamicalCoupling& coupling, int m, const std::vector<double>& t_grid,
                              DensityMode mode = DensityMode::jacobian);

/// Sets the verdict: pass iff the largest midpoint deficit is at most `tol`.
bool concavity_check(ConcavityReport& report, double tol);

// ---------------------------------------------------------------------------
// Seeded endpoint pairs

/// A chart region that can be re-sampled at any resolution.
struct Region {
  enum class Shape {
    /// c0 in [lo0, lo0 + width0], c1 in [lo1, lo1 + width1]; windows wrap on
    /// periodic chart axes. For the hyperbolic disk the axes are polar
    /// (radius, angle).
    chart_window,
    /// Metric ball.
    ball,
  };
  Shape shape = Shape::chart_window;
  double lo0 = 0.0;
  double width0 = 0.0;
  double lo1 = 0.0;
  double width1 = 0.0;
  Point centre;
  double radius = 0.0;
};

bool region_contains(const ModelSpace& space, const Region& region, const Point& p);
std::string describe(const Region& region);

struct TrialSpec {
  std::uint64_t seed = 0;
  std::size_t index = 0;
  std::string family;  // "random", "directed" or "identical"
  Region source;
  Region target;
};

/// Random endpoint regions for trial `index` (deterministic in seed and index).
TrialSpec draw_trial(const ModelSpace& space, std::uint64_t seed, std::size_t index);
/// Thin annular arcs on opposite sides of the hyperbolic disk centre.
TrialSpec draw_directed_trial(const ModelSpace& space, std::uint64_t seed, std::size_t index);

/// Everything computed for one endpoint pair.
struct TrialPipeline {
  DiscreteMeasure mu0;
  DiscreteMeasure mu1;
  TransportPlan plan;
  PotentialPair potentials;
  DynamicalCoupling coupling;
};

TrialPipeline build_pipeline(const TrialSpec& spec, const SampledSpacePtr& sampled);

/// tol(resolution) = constant / resolution.
double cd_tolerance(double constant, int resolution);

/// Tolerance constant: calibrate_cd_constant(50, 64, 7) on euclidean_box, where
/// the floor dominates (the measured box deficits are below 1e-5).
inline constexpr double kDefaultCdConstant = 0.01;

struct CdOptions {
  int m = 2;
  int t_points = 21;
  double tol_constant = kDefaultCdConstant;
  DensityMode mode = DensityMode::jacobian;
  /// Alternate directed arc pairs with random pairs (negative control search).
  bool directed = false;
  /// Called for every successfully built trial pipeline.
  std::function<void(const TrialSpec&, const TrialPipeline&)> inspect;
};

struct TrialResult {
  TrialSpec spec;
  ConcavityReport report;
  double dual_gap = 0.0;
  std::optional<std::string> error;
};

struct CdReport {
  std::string space;
  int m = 0;
  int resolution = 0;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  std::vector<TrialResult> trials;
  double max_deficit = 0.0;
  std::optional<std::size_t> worst_trial;
  bool pass = true;
};

CdReport cd_verdict(const ModelSpace& space, int trials, int resolution, std::uint64_t seed,
                    const CdOptions& options = {});

/// Theta profile of one trial at another resolution.
ConcavityReport rerun_trial(const TrialSpec& spec, const ModelSpace& space, int resolution,
                            const CdOptions& options = {});

struct RefinementReport {
  int resolution = 0;
  double tolerance = 0.0;
  /// Trial indices, worst first.
  std::vector<std::size_t> trials;
  std::vector<double> coarse;
  std::vector<double> fine;
  std::vector<ConcavityReport> profiles;
  /// Every rerun deficit is strictly below its coarse deficit.
  bool strictly_decreasing = true;
  /// Positive coarse deficits strictly decrease; the others stay within tolerance.
  bool pass = true;
};

/// Reruns the `count` worst error-free trials of `report` at `resolution`.
RefinementReport refinement_check(const CdReport& report, const ModelSpace& space, int resolution,
                                  std::size_t count, const CdOptions& options = {});

/// Largest euclidean_box deficit over the trials times resolution, with a 2x
/// margin and a floor; the source of kDefaultCdConstant.
double calibrate_cd_constant(int trials, int resolution, std::uint64_t seed, int m = 2);

/// CSV: t,theta
void write_theta_csv(std::ostream& out, const ConcavityReport& report);

}  // namespace cdlab
