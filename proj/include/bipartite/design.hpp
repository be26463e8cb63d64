#ifndef BIPARTITE_DESIGN_HPP
#define BIPARTITE_DESIGN_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bipartite/types.hpp"

namespace bipartite {

enum class DesignKind { bernoulli, stratified_bernoulli, crd, stratified_crd, point_mass, tabulated };

std::string to_string(DesignKind kind);

/// A (local or global) treatment vector with its probability.
struct WeightedAssignment {
  Assignment values;
  Rational probability;
};

/// Known randomization distribution over treatment vectors in {0,1}^N.
///
/// Bernoulli and CRD designs are handled as single-stratum instances of their
/// stratified counterparts; strata are independent of each other, so every
/// subset probability factorizes over strata. All probability queries are
/// exact rationals.
class Design {
 public:
  static Design bernoulli(Index n_units, Rational p);
  static Design stratified_bernoulli(std::vector<Index> stratum_of_unit, std::vector<Rational> p);
  static Design crd(Index n_units, Index n_treated);
  static Design stratified_crd(std::vector<Index> stratum_of_unit, std::vector<Index> n_treated);
  static Design point_mass(Assignment w);
  static Design tabulated(Index n_units, std::vector<WeightedAssignment> support);

  DesignKind kind() const { return kind_; }
  Index n_units() const { return n_units_; }

  /// Strata are empty for point_mass and tabulated designs.
  Index n_strata() const { return static_cast<Index>(stratum_size_.size()); }
  std::span<const Index> stratum_of_unit() const { return stratum_of_unit_; }
  std::span<const Index> stratum_sizes() const { return stratum_size_; }
  std::span<const Rational> stratum_probabilities() const { return stratum_p_; }
  std::span<const Index> stratum_treated() const { return stratum_treated_; }
  const Assignment& point() const { return point_; }
  const std::vector<WeightedAssignment>& table() const { return table_; }

  bool is_bernoulli_type() const {
    return kind_ == DesignKind::bernoulli || kind_ == DesignKind::stratified_bernoulli;
  }
  bool is_crd_type() const {
    return kind_ == DesignKind::crd || kind_ == DesignKind::stratified_crd;
  }
  /// Units are assigned independently of each other.
  bool independent_units() const { return is_bernoulli_type() || kind_ == DesignKind::point_mass; }

  /// Total number of treated units when every assignment in the support
  /// treats the same number of units.
  std::optional<Index> fixed_treated_count() const;

  /// Probability that the units in subset receive values. Subset may be in
  /// any order; a repeated unit with conflicting values gives 0.
  Rational marginal_prob(std::span<const Index> subset, std::span<const std::uint8_t> values) const;

  /// P(W_S1 = a1, W_S2 = a2). Zero whenever S1 and S2 overlap with
  /// conflicting values.
  Rational joint_prob(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                      std::span<const Index> s2, std::span<const std::uint8_t> a2) const;

  /// Whether marginal_prob(...) > 0, using integer feasibility checks only.
  bool is_possible(std::span<const Index> subset, std::span<const std::uint8_t> values) const;
  bool joint_possible(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                      std::span<const Index> s2, std::span<const std::uint8_t> a2) const;

  /// Probability of a complete treatment vector.
  Rational probability_of(std::span<const std::uint8_t> w) const;

  /// Implied distribution on a subset, indexed by local mask (bit i is the
  /// value of subset[i]). Subset must be sorted and unique.
  std::vector<Rational> local_distribution(std::span<const Index> subset,
                                           std::size_t cap = kDefaultEnumerationCap) const;

  /// Positive-probability local vectors on a subset.
  std::vector<WeightedAssignment> support(std::span<const Index> subset,
                                          std::size_t cap = kDefaultEnumerationCap) const;

  /// Number of complete treatment vectors with positive probability.
  Integer support_size() const;

  /// Every complete treatment vector with positive probability.
  std::vector<WeightedAssignment> enumerate(std::size_t max_assignments = kDefaultOracleCap) const;

  Assignment sample(std::mt19937_64& rng) const;
  Assignment sample(std::uint64_t seed) const;

  std::string describe() const;

 private:
  Design() = default;
  void validate_subset(std::span<const Index> subset, std::span<const std::uint8_t> values) const;
  // Merges two strictly increasing constraint lists. Returns false on conflict.
  bool merged_counts(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                     std::span<const Index> s2, std::span<const std::uint8_t> a2,
                     std::vector<Index>& ones, std::vector<Index>& zeros,
                     std::vector<std::pair<Index, std::uint8_t>>* items) const;
  Rational evaluate(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                    std::span<const Index> s2, std::span<const std::uint8_t> a2) const;
  bool feasible(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                std::span<const Index> s2, std::span<const std::uint8_t> a2) const;

  DesignKind kind_ = DesignKind::bernoulli;
  Index n_units_ = 0;
  std::vector<Index> stratum_of_unit_;
  std::vector<Index> stratum_size_;
  std::vector<Rational> stratum_p_;
  std::vector<Index> stratum_treated_;
  std::vector<Integer> stratum_combinations_;
  Assignment point_;
  std::vector<WeightedAssignment> table_;
};

/// Subsequent per-draw seeds from a root seed (splitmix64 counter stream).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter);

/// Same strata with k more treated units per stratum (capped at the stratum
/// size). Bernoulli kinds raise p by k / stratum size instead.
Design shift_treated(const Design& d, Index k);
/// Same strata with half of each stratum's controls (rounded down) added to
/// the treated. Bernoulli kinds move p by the matching share.
Design treat_half_controls(const Design& d);

}  // namespace bipartite

#endif  // BIPARTITE_DESIGN_HPP
