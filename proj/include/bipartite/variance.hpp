#ifndef BIPARTITE_VARIANCE_HPP
#define BIPARTITE_VARIANCE_HPP

#include <optional>
#include <span>
#include <vector>

#include "bipartite/estimators.hpp"
#include "bipartite/potential_outcomes.hpp"

namespace bipartite {

// All functions here average over the retained units, so the leading factor
// is 1/R^2 with R = |retained|. Pair sums run over ordered pairs.

/// Whether the event a pair's variance term needs can happen.
struct PairClassification {
  Index m = 0;
  Index m_prime = 0;
  bool joint_possible = false;
};

/// Ordered pairs (m, m') of distinct retained units classified by whether
/// pi_{N_m u N_m'}(a) > 0.
std::vector<PairClassification> classify_pairs_arm(const BipartiteGraph& g, const Design& d, int a,
                                                   std::span<const Index> retained);
/// Ordered pairs (m, m'), diagonal included, classified by whether
/// pi_{N_m, N_m'}(0, 1) > 0.
std::vector<PairClassification> classify_pairs_mixed(const BipartiteGraph& g, const Design& d,
                                                     std::span<const Index> retained);

double true_variance_mean_po(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                             int a, std::span<const Index> retained);
/// Cov[Y^(0), Y^(1)] in the two-branch form.
double true_covariance_aon(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                           std::span<const Index> retained);
double true_variance_aon(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                         std::span<const Index> retained);
double true_variance_stochastic(const BipartiteGraph& g, const Design& d,
                                const PotentialOutcomeTable& po, const LocalPolicy& h,
                                std::span<const Index> retained,
                                std::size_t cap = kDefaultEnumerationCap);
double true_variance_stochastic_contrast(const BipartiteGraph& g, const Design& d,
                                         const PotentialOutcomeTable& po, const LocalPolicy& h,
                                         const LocalPolicy& h_prime, std::span<const Index> retained,
                                         std::size_t cap = kDefaultEnumerationCap);

struct VarianceOptions {
  /// Caller asserts all potential outcomes share one sign; enables the
  /// sharper bounds. Never inferred from data.
  bool same_sign = false;
  /// Include m = m' in the lower-bound covariance sum. Needed for the
  /// all-or-none bound to stay conservative.
  bool cov_diagonal = true;
  std::size_t cap = kDefaultEnumerationCap;
};

double estimate_variance_mean_po(const ObservedExperiment& exp, int a, std::span<const Index> retained,
                                 bool same_sign = false);
double estimate_covariance_lb(const ObservedExperiment& exp, std::span<const Index> retained,
                              bool include_diagonal = true);
double estimate_variance_aon(const ObservedExperiment& exp, std::span<const Index> retained,
                             const VarianceOptions& options = {});
double estimate_variance_stochastic(const ObservedExperiment& exp, const LocalPolicy& h,
                                    std::span<const Index> retained, const VarianceOptions& options = {});
double estimate_variance_stochastic_contrast(const ObservedExperiment& exp, const LocalPolicy& h,
                                             const LocalPolicy& h_prime, std::span<const Index> retained,
                                             const VarianceOptions& options = {});

/// Variance bound for the estimand's estimator; absent for +K.
std::optional<double> estimate_variance(const ObservedExperiment& exp, const EstimandSpec& spec,
                                        std::span<const Index> retained,
                                        const VarianceOptions& options = {});

/// Screened point estimate plus variance bound.
EstimateReport estimate(const ObservedExperiment& exp, const EstimandSpec& spec,
                        std::span<const Index> retained, Index n_excluded,
                        const VarianceOptions& options = {});

/// Quantities in the consistency conditions, evaluated on the retained units.
struct ConsistencyStats {
  std::optional<double> gamma;       // min_m pi_{N_m}(a); arm form only
  std::optional<double> gamma_star;  // max over correlated pairs of |pi_union / (pi pi') - 1|
  std::optional<double> Delta;       // max_m E[(h/pi)^2]; policy form only
  std::optional<double> Gamma_star;  // max over correlated pairs of E[|ratio - 1| h h' / (pi pi')]
  Index kappa = 0;                   // ordered correlated pairs
  Index d_o = 0;
  Index d_kappa = 0;
  Index n_units = 0;
};

ConsistencyStats consistency_statistics(const BipartiteGraph& g, const Design& d, int a,
                                        std::span<const Index> retained);
ConsistencyStats consistency_statistics(const BipartiteGraph& g, const Design& d, const LocalPolicy& h,
                                        std::span<const Index> retained,
                                        std::size_t cap = kDefaultEnumerationCap);

}  // namespace bipartite

#endif  // BIPARTITE_VARIANCE_HPP
