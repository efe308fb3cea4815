#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "cdlab/spaces.hpp"

namespace cdlab {

using SampledSpacePtr = std::shared_ptr<const SampledSpace>;

/// Probability weights over the nodes of a SampledSpace.
class DiscreteMeasure {
 public:
  /// Takes weights as given; they must be nonnegative and sum to 1 within 1e-12.
  DiscreteMeasure(SampledSpacePtr space, std::vector<double> weights);

  /// Normalizes nonnegative weights with a positive sum.
  static DiscreteMeasure normalized(SampledSpacePtr space, std::vector<double> weights);
  static DiscreteMeasure point_mass(SampledSpacePtr space, std::size_t node);
  /// Uniform with respect to cell volume on the nodes selected by `inside`.
  static DiscreteMeasure uniform_on(SampledSpacePtr space,
                                    const std::function<bool(const Point&)>& inside);

  const SampledSpace& space() const { return *space_; }
  const SampledSpacePtr& space_ptr() const { return space_; }
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  /// Node indices with positive weight, increasing.
  const std::vector<std::size_t>& support() const { return support_; }

 private:
  SampledSpacePtr space_;
  std::vector<double> weights_;
  std::vector<std::size_t> support_;
};

struct Coupling {
  std::size_t source;
  std::size_t target;
  double mass;
};

struct TransportPlan {
  SampledSpacePtr space;
  std::vector<Coupling> couplings;
  double cost = 0.0;  // sum of mass * d^2 / 2
};

/// Kantorovich potentials over all nodes: psi is +inf off supp mu0, phi is
/// -inf off supp mu1.
struct PotentialPair {
  std::vector<double> psi;
  std::vector<double> phi;
  double gap = 0.0;        // |sum phi mu1 - sum psi mu0 - cost|
  double violation = 0.0;  // max of phi(y) - psi(x) - d^2/2 over support pairs
};

struct ExactOptions {
  std::size_t support_cap = 4096;
};

struct EntropicOptions {
  int max_iterations = 100000;
  // Stopping residual of the scaling iterations; the returned plan is then
  // rounded onto the exact marginals.
  double marginal_tolerance = 1e-6;
  double relaxation = 1.5;  // over-relaxation factor in [1, 2)
};

double half_squared_distance(const ModelSpace& space, const Point& x, const Point& y);

/// Exact optimal plan for the cost d^2/2 (network simplex with column generation).
TransportPlan solve_exact(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                          const ExactOptions& options = {});

/// Entropically regularized plan (log-domain Sinkhorn).
TransportPlan solve_entropic(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                             double epsilon, const EntropicOptions& options = {});

/// Dual potentials certified against an optimal plan.
PotentialPair dual_potentials(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                              const TransportPlan& plan);

double w2_distance(const TransportPlan& plan);

/// Largest row/column marginal error of a plan.
double marginal_error(const TransportPlan& plan, const DiscreteMeasure& mu0,
                      const DiscreteMeasure& mu1);

/// CSV: source,target,mass
void write_plan_csv(std::ostream& out, const TransportPlan& plan);
/// CSV: node,psi,phi (finite support values only)
void write_potentials_csv(std::ostream& out, const PotentialPair& pair);

}  // namespace cdlab
