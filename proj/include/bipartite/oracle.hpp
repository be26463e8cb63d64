#ifndef BIPARTITE_ORACLE_HPP
#define BIPARTITE_ORACLE_HPP

#include <functional>
#include <span>

#include "bipartite/estimand.hpp"
#include "bipartite/potential_outcomes.hpp"
#include "bipartite/variance.hpp"

namespace bipartite {

/// Brute-force enumeration over the full support of a design. Probabilities
/// are exact; outcome arithmetic is compensated double summation.

/// sum_w pi(w) f(w) over the support.
double exact_expectation_of(const Design& d, const std::function<double(const Assignment&)>& f,
                            std::size_t max_assignments = kDefaultOracleCap);

/// E[f^2] - E[f]^2 over the support.
double exact_variance_of(const Design& d, const std::function<double(const Assignment&)>& f,
                         std::size_t max_assignments = kDefaultOracleCap);

/// Estimands measured against the observed mean (and +K) depend on the realized assignment.
bool is_random_estimand(EstimandKind kind);

/// Estimand value when the realized assignment is w, averaged over retained
/// units. Fixed estimands ignore w.
double estimand_value(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                      const EstimandSpec& spec, std::span<const Index> retained,
                      std::span<const std::uint8_t> w);

/// Value of a fixed estimand; throws PreconditionError for random ones.
double exact_estimand(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                      const EstimandSpec& spec, std::span<const Index> retained);

/// +K mean by explicit enumeration of every K-subset of controls.
double plus_k_mean_bruteforce(const BipartiteGraph& g, const PotentialOutcomeTable& po, Index k,
                              std::span<const Index> retained, std::span<const std::uint8_t> w);

/// Point estimator of the estimand at assignment w with outcomes from po.
double estimator_at(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                    const EstimandSpec& spec, std::span<const Index> retained, const Assignment& w);

/// E[estimator].
double exact_expectation(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                         const EstimandSpec& spec, std::span<const Index> retained,
                         std::size_t max_assignments = kDefaultOracleCap);
/// E[estimator - estimand(W)].
double exact_bias(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                  const EstimandSpec& spec, std::span<const Index> retained,
                  std::size_t max_assignments = kDefaultOracleCap);
/// V[estimator].
double exact_variance(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                      const EstimandSpec& spec, std::span<const Index> retained,
                      std::size_t max_assignments = kDefaultOracleCap);
/// V[estimator - estimand(W)].
double exact_error_variance(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                            const EstimandSpec& spec, std::span<const Index> retained,
                            std::size_t max_assignments = kDefaultOracleCap);
/// E[variance bound].
double exact_expected_variance_bound(const BipartiteGraph& g, const Design& d,
                                     const PotentialOutcomeTable& po, const EstimandSpec& spec,
                                     std::span<const Index> retained, const VarianceOptions& options = {},
                                     std::size_t max_assignments = kDefaultOracleCap);

}  // namespace bipartite

#endif  // BIPARTITE_ORACLE_HPP
