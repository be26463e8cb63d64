#ifndef BIPARTITE_POTENTIAL_OUTCOMES_HPP
#define BIPARTITE_POTENTIAL_OUTCOMES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bipartite/graph.hpp"

namespace bipartite {

/// Y_m(w) for every outcome unit and every local vector on its intervention
/// set, indexed by local mask. Only meaningful in oracle and simulation code.
class PotentialOutcomeTable {
 public:
  /// values[m] must have 2^{N_m} entries.
  PotentialOutcomeTable(const BipartiteGraph& g, std::vector<std::vector<double>> values);

  Index n_outcome() const { return static_cast<Index>(values_.size()); }
  double value(Index m, LocalMask mask) const { return values_.at(m).at(mask); }
  std::span<const double> unit(Index m) const { return values_.at(m); }

  /// Observed outcomes under a complete treatment vector.
  Vector observe(const BipartiteGraph& g, std::span<const std::uint8_t> w) const;

  /// max |Y_m(w)|
  double bound() const;

 private:
  std::vector<std::vector<double>> values_;
};

enum class OutcomeFamily { constant, additive, saturating, interaction };

std::string to_string(OutcomeFamily family);
OutcomeFamily parse_outcome_family(const std::string& name);

/// Seeded potential-outcome tables.
///   constant:    Y_m = c_m
///   additive:    Y_m = c_m + sum_n beta_n w_n
///   saturating:  Y_m = c_m + s_m min(1, 2 W^tot_m / N_m)
///   interaction: Y_m = c_m + sum_n beta_n w_n + g_m prod_{n in N_m} w_n - g'_m w_first w_last
/// Intercepts and slopes are drawn with mixed signs.
PotentialOutcomeTable make_outcome_table(const BipartiteGraph& g, OutcomeFamily family,
                                         std::uint64_t seed, std::size_t cap = kDefaultEnumerationCap);

}  // namespace bipartite

#endif  // BIPARTITE_POTENTIAL_OUTCOMES_HPP
