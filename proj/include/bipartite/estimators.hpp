#ifndef BIPARTITE_ESTIMATORS_HPP
#define BIPARTITE_ESTIMATORS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bipartite/design.hpp"
#include "bipartite/estimand.hpp"
#include "bipartite/graph.hpp"
#include "bipartite/policy.hpp"

namespace bipartite {

/// One realized experiment. Holds references to the graph and design, which
/// must outlive it. The local mask and exact propensity pi_{N_m}(W_{N_m}) of
/// every outcome unit are computed once at construction.
class ObservedExperiment {
 public:
  /// Throws InputError when w or y is malformed or w is impossible under
  /// the design.
  ObservedExperiment(const BipartiteGraph& g, const Design& d, Assignment w, Vector y);

  const BipartiteGraph& graph() const { return *graph_; }
  const Design& design() const { return *design_; }
  const Assignment& w() const { return w_; }
  const Vector& y() const { return y_; }

  LocalMask mask(Index m) const { return masks_[m]; }
  const Rational& propensity(Index m) const { return propensity_[m]; }
  double propensity_d(Index m) const { return propensity_d_[m]; }

  /// W_{N_m} is constant at arm a (trivially true for isolated units).
  bool at_arm(Index m, int a) const;

 private:
  const BipartiteGraph* graph_;
  const Design* design_;
  Assignment w_;
  Vector y_;
  std::vector<LocalMask> masks_;
  std::vector<Rational> propensity_;
  std::vector<double> propensity_d_;
};

struct Violation {
  Index unit = 0;  // 0-based outcome index
  std::string condition;
};

struct PositivityReport {
  std::string estimand_id;
  std::vector<Violation> excluded;
  std::vector<Index> retained;
};

/// Screens every outcome unit for the positivity condition the estimand
/// needs. Stochastic and +K screens enumerate local supports and honour cap.
/// +K additionally throws PreconditionError when the design does not fix the
/// number of treated units, and InputError when K exceeds the control count.
PositivityReport screen_positivity(const BipartiteGraph& g, const Design& d, const EstimandSpec& spec,
                                   std::size_t cap = kDefaultEnumerationCap);

/// Units retained by every report (the "remove units violating positivity
/// for any estimand" mode).
std::vector<Index> common_retained(std::span<const PositivityReport> reports);

struct EstimateReport {
  std::string estimand_id;
  double point_estimate = 0.0;
  std::optional<double> variance_bound;
  Index n_retained = 0;
  Index n_excluded = 0;
  Index effective_units = 0;

  std::optional<double> standard_error() const;
};

/// Mean observed outcome over retained units.
double observed_mean(const ObservedExperiment& exp, std::span<const Index> retained);

/// IPW estimate of the mean potential outcome under constant arm a.
double estimate_mean_po(const ObservedExperiment& exp, int a, std::span<const Index> retained);

double estimate_stochastic(const ObservedExperiment& exp, const LocalPolicy& h,
                           std::span<const Index> retained);
double estimate_stochastic_contrast(const ObservedExperiment& exp, const LocalPolicy& h,
                                    const LocalPolicy& h_prime, std::span<const Index> retained);

/// +K weight of outcome unit m under the realized assignment.
Rational rho_weight_exact(const ObservedExperiment& exp, Index m, Index k);
double rho_weight(const ObservedExperiment& exp, Index m, Index k);

/// Mean of rho_m(W) Y_m over retained units (the +K mean, not the contrast).
double estimate_plus_k_mean(const ObservedExperiment& exp, Index k, std::span<const Index> retained);

/// Point estimate of the estimand over the retained units.
double point_estimate(const ObservedExperiment& exp, const EstimandSpec& spec,
                      std::span<const Index> retained);

/// Retained units whose weight is nonzero under the realized assignment.
Index effective_units(const ObservedExperiment& exp, const EstimandSpec& spec,
                      std::span<const Index> retained);

}  // namespace bipartite

#endif  // BIPARTITE_ESTIMATORS_HPP
