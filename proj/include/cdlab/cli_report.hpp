#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "cdlab/functionals.hpp"
#include "cdlab/spaces.hpp"
#include "json.hpp"

namespace cdlab {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum class Suite { space, transport, cd, hj, flow, all };

std::string to_string(Suite suite);

/// One model space as written in a config: a kind plus its parameters.
struct SpaceSpec {
  std::string kind = "euclidean_box";
  int dim = 2;
  double side = 1.0;
  double radius = 1.0;
  double total_angle = 1.5 * std::numbers::pi;
  double radial_cutoff = 1.0;
  double chart_radius = 0.8;

  ModelSpace build() const;
};

struct Tolerances {
  double cd_constant = kDefaultCdConstant;
  double dual_gap = 1e-9;
  double reverse_contraction = 1e-9;
  /// Contraction excess allowed, in units of the flow step.
  double contraction_steps = 10.0;
  double laplacian_constant = 1.0;
  double riccati = 1e-4;
  double volume = 0.05;
};

/// A full experiment. Parsing never fills the seed from the environment.
struct ExperimentConfig {
  std::vector<SpaceSpec> spaces;
  /// The first entry is the working resolution; a second one is used for
  /// refinement checks.
  std::vector<int> resolutions{64};
  int m = 2;
  int t_points = 21;
  /// Seeded instances per space; 0 leaves only the structural checks.
  int trials = 5;
  /// Random fields per space for the semigroup check.
  int fields = 10;
  /// Ray or curve pairs per space for the contraction checks.
  int pairs = 100;
  double flow_step = 1e-3;
  std::uint64_t seed = 0;
  Suite suite = Suite::all;
  std::string out = ".";
  std::string format = "json";
  Tolerances tolerances;

  /// The four nonnegatively curved built-ins.
  static std::vector<SpaceSpec> default_spaces();

  /// Throws ConfigError naming the offending field.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  /// Parses a JSON document; syntax errors report line and column.
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Checks the invariants (resolutions >= 2, tolerances > 0, ...).
  void validate() const;
  nlohmann::json to_json() const;
};

struct CheckResult {
  std::string name;
  std::string space;
  bool pass = true;
  double value = 0.0;
  double tolerance = 0.0;
  /// The instance behind `value`: seed, trial index, ray or node indices.
  nlohmann::json witness = nlohmann::json::object();
  double seconds = 0.0;
};

struct ThetaSeries {
  std::string space;
  int resolution = 0;
  std::size_t trial = 0;
  std::vector<double> t;
  std::vector<double> theta;
};

struct DefectRow {
  std::string space;
  std::size_t field = 0;
  int resolution = 0;
  double defect = 0.0;
};

struct SuiteReport {
  std::string version = kArtifactVersion;
  std::string rng;
  nlohmann::json config = nlohmann::json::object();
  std::vector<CheckResult> checks;
  std::vector<ThetaSeries> profiles;
  std::vector<DefectRow> defects;

  bool pass() const;
  nlohmann::json to_json(bool with_timings = true) const;
};

SuiteReport run(const ExperimentConfig& config);

/// CSV: name,space,pass,value,tolerance
void write_checks_csv(std::ostream& out, const SuiteReport& report);
/// CSV: space,resolution,trial,t,theta
void write_profiles_csv(std::ostream& out, const SuiteReport& report);
/// CSV: space,field,resolution,defect
void write_defects_csv(std::ostream& out, const SuiteReport& report);

/// Writes report.json (format "json") or checks.csv (format "csv"), plus
/// theta.csv and defects.csv, into `dir`. Returns the written paths.
std::vector<std::filesystem::path> emit(const SuiteReport& report, const std::filesystem::path& dir,
                                        std::string_view format);

}  // namespace cdlab
