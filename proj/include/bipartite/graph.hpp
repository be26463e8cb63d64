#ifndef BIPARTITE_GRAPH_HPP
#define BIPARTITE_GRAPH_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bipartite/types.hpp"

namespace bipartite {

using Edge = std::pair<Index, Index>;  // (intervention, outcome), 0-based

/// Fixed bipartite graph between intervention units and outcome units.
///
/// Stored sparsely as an edge list with two sorted adjacency views:
/// intervention_set(m) lists the intervention units linked to outcome unit m,
/// outcome_set(n) lists the outcome units linked to intervention unit n.
/// Immutable after construction.
class BipartiteGraph {
 public:
  /// Throws InputError on zero units, out-of-range indices or duplicate
  /// edges. Isolated units on either side are allowed.
  BipartiteGraph(Index n_intervention, Index n_outcome, std::vector<Edge> edges);

  Index n_intervention() const { return n_intervention_; }
  Index n_outcome() const { return n_outcome_; }
  std::size_t n_edges() const { return edges_.size(); }

  /// Edges sorted by (intervention, outcome).
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const Index> intervention_set(Index m) const { return intervention_sets_.at(m); }
  std::span<const Index> outcome_set(Index n) const { return outcome_sets_.at(n); }
  std::size_t intervention_set_size(Index m) const { return intervention_sets_.at(m).size(); }

  const std::vector<std::vector<Index>>& intervention_sets() const { return intervention_sets_; }
  const std::vector<std::vector<Index>>& outcome_sets() const { return outcome_sets_; }

  bool has_edge(Index n, Index m) const;

  /// Outcome units with an empty intervention set.
  std::vector<Index> isolated_outcomes() const;

  /// Subgraph keeping the listed outcome units (renumbered in the given
  /// order) and every intervention unit.
  BipartiteGraph restrict_outcomes(std::span<const Index> keep) const;

 private:
  Index n_intervention_;
  Index n_outcome_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> intervention_sets_;
  std::vector<std::vector<Index>> outcome_sets_;
};

struct GraphStats {
  double density_pct = 0.0;
  double avg_intervention_set_size = 0.0;
  double avg_outcome_set_size = 0.0;
  Index max_intervention_set_size = 0;  // d_o
  Index max_outcome_set_size = 0;       // d_I
  Index max_pairwise_overlap = 0;       // d_kappa
  Index n_overlapping_pairs = 0;        // ordered pairs m != m' sharing a unit
  Index n_isolated_outcomes = 0;
  double pct_outcomes_single_parent = 0.0;
  double pct_interventions_two_outcomes = 0.0;
};

GraphStats graph_stats(const BipartiteGraph& g);

enum class GraphClass { one_to_one, single_parent, partial, general };

std::string to_string(GraphClass c);

struct GraphClassification {
  GraphClass kind = GraphClass::general;
  /// Connected components that carry at least one edge; filled for
  /// single_parent and partial graphs.
  struct Component {
    std::vector<Index> intervention_units;
    std::vector<Index> outcome_units;
  };
  std::vector<Component> components;
};

/// Precedence: one_to_one > single_parent > partial > general.
GraphClassification classify_graph(const BipartiteGraph& g);

/// True iff w and w_prime agree on every unit of outcome unit m's
/// intervention set.
bool consistent_experience(const BipartiteGraph& g, Index m, std::span<const std::uint8_t> w,
                           std::span<const std::uint8_t> w_prime);

/// Packs w restricted to the intervention set of m.
LocalMask local_mask(const BipartiteGraph& g, Index m, std::span<const std::uint8_t> w);

/// Expands a local mask over intervention_set(m) into explicit values.
Assignment local_values(const BipartiteGraph& g, Index m, LocalMask mask);

/// Sorted, deduplicated union of two sorted index lists.
std::vector<Index> sorted_union(std::span<const Index> a, std::span<const Index> b);

/// Size of the intersection of two sorted index lists.
std::size_t intersection_size(std::span<const Index> a, std::span<const Index> b);

}  // namespace bipartite

#endif  // BIPARTITE_GRAPH_HPP
