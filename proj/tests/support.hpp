// Fixtures and independent brute-force helpers shared by the test binaries.
#ifndef BIPARTITE_TESTS_SUPPORT_HPP
#define BIPARTITE_TESTS_SUPPORT_HPP

#include <algorithm>
#include <bit>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bipartite/design.hpp"
#include "bipartite/graph.hpp"

namespace fixtures {

using namespace bipartite;

// Three intervention units: 1 -> {1,2,3,4}, 2 -> {4,5,6,7}, 3 -> {6,7,8}; 0-based.
inline BipartiteGraph three_lines() {
  std::vector<Edge> edges;
  for (Index m : {0, 1, 2, 3}) edges.emplace_back(0, m);
  for (Index m : {3, 4, 5, 6}) edges.emplace_back(1, m);
  for (Index m : {5, 6, 7}) edges.emplace_back(2, m);
  return BipartiteGraph(3, 8, edges);
}

inline BipartiteGraph identity(Index n) {
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) edges.emplace_back(i, i);
  return BipartiteGraph(n, n, edges);
}

inline BipartiteGraph random_graph(Index n, Index m, std::size_t max_set, std::mt19937_64& rng,
                                   bool allow_isolated = false) {
  std::vector<Edge> edges;
  std::uniform_int_distribution<std::size_t> size_dist(allow_isolated ? 0 : 1, max_set);
  std::vector<Index> units(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) units[i] = i;
  for (Index j = 0; j < m; ++j) {
    std::shuffle(units.begin(), units.end(), rng);
    const auto k = std::min<std::size_t>(size_dist(rng), units.size());
    for (std::size_t i = 0; i < k; ++i) edges.emplace_back(units[i], j);
  }
  return BipartiteGraph(n, m, edges);
}

// Independent description of a design, evaluated straight from its
// definition rather than through the library's closed forms.
struct BruteDesign {
  std::string kind;
  std::vector<Index> strata;        // per unit
  std::vector<Rational> p;          // per stratum
  std::vector<Index> treated;       // per stratum
  Assignment point;
  std::map<Assignment, Rational> table;

  Rational prob(const Assignment& w) const {
    if (kind == "point_mass") return w == point ? 1 : 0;
    if (kind == "tabulated") {
      const auto it = table.find(w);
      return it == table.end() ? Rational(0) : it->second;
    }
    const auto n_strata = static_cast<std::size_t>(*std::max_element(strata.begin(), strata.end()) + 1);
    std::vector<Index> size(n_strata, 0), ones(n_strata, 0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      ++size[strata[i]];
      ones[strata[i]] += w[i];
    }
    Rational out = 1;
    for (std::size_t s = 0; s < n_strata; ++s) {
      if (kind == "bernoulli") {
        for (Index i = 0; i < ones[s]; ++i) out *= p[s];
        for (Index i = ones[s]; i < size[s]; ++i) out *= 1 - p[s];
      } else {
        if (ones[s] != treated[s]) return 0;
        // 1 / C(size, treated) by counting subsets
        Integer count = 0;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << size[s]); ++mask) {
          if (std::popcount(mask) == treated[s]) count += 1;
        }
        out /= Rational(count);
      }
    }
    return out;
  }
};

struct DesignCase {
  std::string name;
  Design design;
  BruteDesign brute;
};

inline Rational random_rational(std::mt19937_64& rng, int lo = 1, int hi = 9, int den = 10) {
  std::uniform_int_distribution<int> d(lo, hi);
  Rational q(d(rng), den);
  q.canonicalize();
  return q;
}

// One case of every design kind on n units.
inline std::vector<DesignCase> all_design_kinds(Index n, std::mt19937_64& rng) {
  std::vector<DesignCase> out;
  std::vector<Index> one_stratum(static_cast<std::size_t>(n), 0);
  std::vector<Index> two_strata(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) two_strata[i] = (i % 3 == 0) ? 1 : 0;
  if (n < 3) two_strata.assign(static_cast<std::size_t>(n), 0);
  const Index n_s = *std::max_element(two_strata.begin(), two_strata.end()) + 1;
  std::vector<Index> sizes(static_cast<std::size_t>(n_s), 0);
  for (Index s : two_strata) ++sizes[s];

  {
    const Rational p = random_rational(rng);
    out.push_back({"bernoulli", Design::bernoulli(n, p), {"bernoulli", one_stratum, {p}, {}, {}, {}}});
  }
  {
    std::vector<Rational> ps;
    for (Index s = 0; s < n_s; ++s) ps.push_back(random_rational(rng));
    out.push_back({"stratified_bernoulli", Design::stratified_bernoulli(two_strata, ps),
                   {"bernoulli", two_strata, ps, {}, {}, {}}});
  }
  {
    std::uniform_int_distribution<Index> t(1, std::max<Index>(1, n - 1));
    const Index k = t(rng);
    out.push_back({"crd", Design::crd(n, k), {"crd", one_stratum, {}, {k}, {}, {}}});
  }
  {
    std::vector<Index> ts;
    for (Index s = 0; s < n_s; ++s) {
      std::uniform_int_distribution<Index> t(0, sizes[s]);
      ts.push_back(t(rng));
    }
    out.push_back({"stratified_crd", Design::stratified_crd(two_strata, ts),
                   {"crd", two_strata, {}, ts, {}, {}}});
  }
  {
    Assignment w(static_cast<std::size_t>(n));
    std::bernoulli_distribution coin(0.5);
    for (auto& v : w) v = coin(rng);
    BruteDesign b;
    b.kind = "point_mass";
    b.point = w;
    out.push_back({"point_mass", Design::point_mass(w), b});
  }
  {
    // Three to six distinct vectors with random positive weights.
    std::uniform_int_distribution<int> count(3, 6), weight(1, 5);
    std::bernoulli_distribution coin(0.5);
    std::map<Assignment, Rational> raw;
    const int k = std::min<int>(count(rng), 1 << std::min<Index>(n, 4));
    Rational total = 0;
    while (static_cast<int>(raw.size()) < k) {
      Assignment w(static_cast<std::size_t>(n));
      for (auto& v : w) v = coin(rng);
      if (raw.count(w)) continue;
      raw[w] = weight(rng);
      total += raw[w];
    }
    std::vector<WeightedAssignment> support;
    BruteDesign b;
    b.kind = "tabulated";
    for (auto& [w, q] : raw) {
      Rational prob = q / total;
      prob.canonicalize();
      support.push_back({w, prob});
      b.table[w] = prob;
    }
    out.push_back({"tabulated", Design::tabulated(n, support), b});
  }
  return out;
}

inline Assignment bits_of(std::uint64_t mask, std::size_t n) {
  Assignment w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = (mask >> i) & 1U;
  return w;
}

// P(W_S = a) by summing the brute-force probability over {0,1}^N.
inline Rational brute_marginal(const BruteDesign& d, std::size_t n, const std::vector<Index>& s,
                               const Assignment& a) {
  Rational total = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    const auto w = bits_of(mask, n);
    bool match = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (w[s[i]] != a[i]) {
        match = false;
        break;
      }
    }
    if (match) total += d.prob(w);
  }
  return total;
}

}  // namespace fixtures

#endif  // BIPARTITE_TESTS_SUPPORT_HPP
