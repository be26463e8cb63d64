#include "bipartite/graph.hpp"

#include <algorithm>
#include <numeric>

namespace bipartite {

BipartiteGraph::BipartiteGraph(Index n_intervention, Index n_outcome, std::vector<Edge> edges)
    : n_intervention_(n_intervention), n_outcome_(n_outcome), edges_(std::move(edges)) {
  if (n_intervention_ < 1 || n_outcome_ < 1) {
    throw InputError("graph needs at least one intervention unit and one outcome unit");
  }
  for (const auto& [n, m] : edges_) {
    if (n < 0 || n >= n_intervention_ || m < 0 || m >= n_outcome_) {
      throw InputError("edge (" + std::to_string(n + 1) + "," + std::to_string(m + 1) +
                       ") out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  const auto dup = std::adjacent_find(edges_.begin(), edges_.end());
  if (dup != edges_.end()) {
    throw InputError("duplicate edge (" + std::to_string(dup->first + 1) + "," +
                     std::to_string(dup->second + 1) + ")");
  }
  intervention_sets_.assign(static_cast<std::size_t>(n_outcome_), {});
  outcome_sets_.assign(static_cast<std::size_t>(n_intervention_), {});
  // edges_ is sorted by intervention first, so both views come out sorted.
  for (const auto& [n, m] : edges_) {
    intervention_sets_[m].push_back(n);
    outcome_sets_[n].push_back(m);
  }
}

bool BipartiteGraph::has_edge(Index n, Index m) const {
  const auto& set = intervention_sets_.at(m);
  return std::binary_search(set.begin(), set.end(), n);
}

std::vector<Index> BipartiteGraph::isolated_outcomes() const {
  std::vector<Index> out;
  for (Index m = 0; m < n_outcome_; ++m) {
    if (intervention_sets_[m].empty()) out.push_back(m);
  }
  return out;
}

BipartiteGraph BipartiteGraph::restrict_outcomes(std::span<const Index> keep) const {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (Index n : intervention_set(keep[i])) edges.emplace_back(n, static_cast<Index>(i));
  }
  return BipartiteGraph(n_intervention_, static_cast<Index>(keep.size()), std::move(edges));
}

GraphStats graph_stats(const BipartiteGraph& g) {
  GraphStats s;
  const auto N = g.n_intervention();
  const auto M = g.n_outcome();
  s.density_pct = 100.0 * static_cast<double>(g.n_edges()) / (static_cast<double>(N) * M);
  s.avg_intervention_set_size = static_cast<double>(g.n_edges()) / M;
  s.avg_outcome_set_size = static_cast<double>(g.n_edges()) / N;

  Index single_parent = 0;
  for (Index m = 0; m < M; ++m) {
    const auto size = static_cast<Index>(g.intervention_set_size(m));
    s.max_intervention_set_size = std::max(s.max_intervention_set_size, size);
    if (size == 0) ++s.n_isolated_outcomes;
    if (size == 1) ++single_parent;
  }
  Index two_outcomes = 0;
  for (Index n = 0; n < N; ++n) {
    const auto size = static_cast<Index>(g.outcome_set(n).size());
    s.max_outcome_set_size = std::max(s.max_outcome_set_size, size);
    if (size == 2) ++two_outcomes;
  }
  s.pct_outcomes_single_parent = 100.0 * single_parent / M;
  s.pct_interventions_two_outcomes = 100.0 * two_outcomes / N;

  // Overlap sizes via co-occurrence counts through shared intervention units.
  std::vector<Index> shared(static_cast<std::size_t>(M), 0);
  std::vector<Index> touched;
  for (Index m = 0; m < M; ++m) {
    touched.clear();
    for (Index n : g.intervention_set(m)) {
      for (Index other : g.outcome_set(n)) {
        if (other == m) continue;
        if (shared[other]++ == 0) touched.push_back(other);
      }
    }
    s.n_overlapping_pairs += static_cast<Index>(touched.size());
    for (Index other : touched) {
      s.max_pairwise_overlap = std::max(s.max_pairwise_overlap, shared[other]);
      shared[other] = 0;
    }
  }
  return s;
}

std::string to_string(GraphClass c) {
  switch (c) {
    case GraphClass::one_to_one: return "one_to_one";
    case GraphClass::single_parent: return "single_parent";
    case GraphClass::partial: return "partial";
    case GraphClass::general: return "general";
  }
  return "general";
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

GraphClassification classify_graph(const BipartiteGraph& g) {
  const auto N = static_cast<std::size_t>(g.n_intervention());
  const auto M = static_cast<std::size_t>(g.n_outcome());

  // Nodes 0..N-1 are intervention units, N..N+M-1 outcome units.
  DisjointSets sets(N + M);
  for (const auto& [n, m] : g.edges()) sets.unite(static_cast<std::size_t>(n), N + m);

  std::vector<std::size_t> root_slot(N + M, static_cast<std::size_t>(-1));
  GraphClassification out;
  for (const auto& [n, m] : g.edges()) {
    const auto root = sets.find(static_cast<std::size_t>(n));
    if (root_slot[root] == static_cast<std::size_t>(-1)) {
      root_slot[root] = out.components.size();
      out.components.emplace_back();
    }
  }
  for (std::size_t n = 0; n < N; ++n) {
    const auto slot = root_slot[sets.find(n)];
    if (slot != static_cast<std::size_t>(-1)) {
      out.components[slot].intervention_units.push_back(static_cast<Index>(n));
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    const auto slot = root_slot[sets.find(N + m)];
    if (slot != static_cast<std::size_t>(-1)) {
      out.components[slot].outcome_units.push_back(static_cast<Index>(m));
    }
  }

  const bool all_single = std::all_of(g.intervention_sets().begin(), g.intervention_sets().end(),
                                      [](const auto& set) { return set.size() == 1; });
  const bool each_one_outcome = std::all_of(g.outcome_sets().begin(), g.outcome_sets().end(),
                                            [](const auto& set) { return set.size() == 1; });
  if (N == M && all_single && each_one_outcome) {
    out.kind = GraphClass::one_to_one;
  } else if (all_single) {
    out.kind = GraphClass::single_parent;
  } else if (out.components.size() >= 2) {
    out.kind = GraphClass::partial;
  } else {
    out.kind = GraphClass::general;
    out.components.clear();
  }
  if (out.kind == GraphClass::one_to_one) out.components.clear();
  return out;
}

bool consistent_experience(const BipartiteGraph& g, Index m, std::span<const std::uint8_t> w,
                           std::span<const std::uint8_t> w_prime) {
  const auto N = static_cast<std::size_t>(g.n_intervention());
  if (w.size() != N || w_prime.size() != N) {
    throw InputError("treatment vectors must have one entry per intervention unit");
  }
  for (Index n : g.intervention_set(m)) {
    if (w[n] != w_prime[n]) return false;
  }
  return true;
}

LocalMask local_mask(const BipartiteGraph& g, Index m, std::span<const std::uint8_t> w) {
  const auto set = g.intervention_set(m);
  if (set.size() > 64) throw EnumerationCapExceeded("intervention set larger than 64 units");
  LocalMask mask = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (w[set[i]]) mask |= LocalMask{1} << i;
  }
  return mask;
}

Assignment local_values(const BipartiteGraph& g, Index m, LocalMask mask) {
  const auto size = g.intervention_set_size(m);
  Assignment values(size);
  for (std::size_t i = 0; i < size; ++i) values[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
  return values;
}

std::vector<Index> sorted_union(std::span<const Index> a, std::span<const Index> b) {
  std::vector<Index> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::size_t intersection_size(std::span<const Index> a, std::span<const Index> b) {
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

}  // namespace bipartite
