#ifndef BIPARTITE_POLICY_HPP
#define BIPARTITE_POLICY_HPP

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "bipartite/design.hpp"
#include "bipartite/graph.hpp"

namespace bipartite {

/// Hypothesized distribution h_m over the local treatment vectors of one
/// outcome unit's intervention set. Local vectors are LocalMask values over
/// intervention_set(m).
namespace local {

struct Bernoulli {
  Rational alpha;
};

struct PointMass {
  LocalMask mask = 0;
};

/// Fixes the key unit (position within the intervention set) to `arm`; the
/// remaining units are Bernoulli(p).
struct KeyAssociated {
  std::size_t key_position = 0;
  int arm = 1;
  Rational p;
};

/// Marginal of a global assignment distribution on the intervention set.
struct Implied {
  std::shared_ptr<const Design> design;
};

/// Explicit probabilities indexed by local mask.
struct Table {
  std::vector<Rational> probabilities;
};

using Entry = std::variant<Bernoulli, PointMass, KeyAssociated, Implied, Table>;

}  // namespace local

/// Collective stochastic intervention h = (h_1, ..., h_M).
class LocalPolicy {
 public:
  LocalPolicy(const BipartiteGraph& g, std::vector<local::Entry> entries, std::string label);

  /// Bernoulli(alpha) over every intervention set.
  static LocalPolicy bernoulli(const BipartiteGraph& g, const Rational& alpha);
  /// Point mass on the all-`arm` vector of every intervention set.
  static LocalPolicy constant_arm(const BipartiteGraph& g, int arm);
  static LocalPolicy point_mass(const BipartiteGraph& g, std::vector<LocalMask> masks);
  /// key_unit[m] is the (0-based) key intervention unit of outcome unit m;
  /// it must belong to intervention_set(m). Isolated outcome units get the
  /// trivial distribution on their empty set and their key entry is ignored.
  static LocalPolicy key_associated(const BipartiteGraph& g, const std::vector<Index>& key_unit,
                                    int arm, const Rational& p);
  static LocalPolicy implied(const BipartiteGraph& g, Design global);

  Index n_outcome() const { return static_cast<Index>(entries_.size()); }
  const std::string& label() const { return label_; }
  const local::Entry& entry(Index m) const { return entries_.at(m); }

  /// h_m(local); throws InputError when the length does not match N_m.
  Rational prob(Index m, std::span<const std::uint8_t> local_values) const;
  Rational prob(Index m, LocalMask mask) const;

  /// Full table of h_m over all 2^{N_m} local vectors.
  std::vector<Rational> table(Index m, std::size_t cap = kDefaultEnumerationCap) const;

 private:
  std::vector<std::size_t> set_sizes_;
  std::vector<std::vector<Index>> sets_;
  std::vector<local::Entry> entries_;
  std::string label_;
};

/// Whether g_candidate induces h on every intervention set (within 1e-10).
/// Verification only; no search for a candidate.
bool is_implementable(const LocalPolicy& h, const Design& g_candidate, const BipartiteGraph& graph,
                      std::size_t cap = kDefaultEnumerationCap);

enum class ExposureFunction { proportion_treated, count_treated };

/// Implied marginal on intervention_set(m) of the uniform distribution over
/// complete treatment vectors whose exposure f(A*, w) for unit m equals
/// e_m. Throws InputError when that level set is empty.
local::Table target_exposure_policy(const BipartiteGraph& g, const BipartiteGraph& a_star,
                                    ExposureFunction f, Index m, const Rational& e_m,
                                    std::size_t cap = kDefaultEnumerationCap);

}  // namespace bipartite

#endif  // BIPARTITE_POLICY_HPP
