#include "bipartite/policy.hpp"

#include <algorithm>
#include <cmath>

namespace bipartite {

namespace {

Rational bernoulli_mass(const Rational& alpha, std::size_t bits, LocalMask mask) {
  Rational out = 1;
  const Rational complement = 1 - alpha;
  for (std::size_t i = 0; i < bits; ++i) out *= ((mask >> i) & 1U) ? alpha : complement;
  return out;
}

void check_probability(const Rational& q) {
  if (q < 0 || q > 1) throw InputError("policy probability outside [0,1]");
}

}  // namespace

LocalPolicy::LocalPolicy(const BipartiteGraph& g, std::vector<local::Entry> entries,
                         std::string label)
    : entries_(std::move(entries)), label_(std::move(label)) {
  if (static_cast<Index>(entries_.size()) != g.n_outcome()) {
    throw InputError("policy needs one entry per outcome unit");
  }
  set_sizes_.reserve(entries_.size());
  sets_.reserve(entries_.size());
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto set = g.intervention_set(m);
    set_sizes_.push_back(set.size());
    sets_.emplace_back(set.begin(), set.end());
    const auto bits = set.size();
    std::visit(
        [&](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, local::Bernoulli>) {
            check_probability(e.alpha);
          } else if constexpr (std::is_same_v<T, local::PointMass>) {
            if (bits < 64 && (e.mask >> bits) != 0) throw InputError("point mass outside the set");
          } else if constexpr (std::is_same_v<T, local::KeyAssociated>) {
            if (e.key_position >= bits) throw InputError("key unit not in the intervention set");
            if (e.arm != 0 && e.arm != 1) throw InputError("key arm must be 0 or 1");
            check_probability(e.p);
          } else if constexpr (std::is_same_v<T, local::Implied>) {
            if (!e.design || e.design->n_units() != g.n_intervention()) {
              throw InputError("implied policy design does not match the graph");
            }
          } else {
            if (bits >= 63 || e.probabilities.size() != (std::size_t{1} << bits)) {
              throw InputError("policy table has wrong size");
            }
            Rational total = 0;
            for (const auto& q : e.probabilities) {
              check_probability(q);
              total += q;
            }
            if (std::abs(to_double(total) - 1.0) > Tolerances::kProbabilitySum) {
              throw InputError("policy table does not sum to 1");
            }
          }
        },
        entries_[m]);
  }
}

LocalPolicy LocalPolicy::bernoulli(const BipartiteGraph& g, const Rational& alpha) {
  std::vector<local::Entry> entries(static_cast<std::size_t>(g.n_outcome()),
                                    local::Bernoulli{alpha});
  return LocalPolicy(g, std::move(entries), "bernoulli(" + alpha.get_str() + ")");
}

LocalPolicy LocalPolicy::constant_arm(const BipartiteGraph& g, int arm) {
  if (arm != 0 && arm != 1) throw InputError("arm must be 0 or 1");
  std::vector<local::Entry> entries;
  for (Index m = 0; m < g.n_outcome(); ++m) {
    entries.emplace_back(local::PointMass{arm ? full_mask(g.intervention_set_size(m)) : 0});
  }
  return LocalPolicy(g, std::move(entries), arm ? "all_treated" : "all_control");
}

LocalPolicy LocalPolicy::point_mass(const BipartiteGraph& g, std::vector<LocalMask> masks) {
  std::vector<local::Entry> entries;
  for (auto mask : masks) entries.emplace_back(local::PointMass{mask});
  return LocalPolicy(g, std::move(entries), "point_mass");
}

LocalPolicy LocalPolicy::key_associated(const BipartiteGraph& g,
                                        const std::vector<Index>& key_unit, int arm,
                                        const Rational& p) {
  if (static_cast<Index>(key_unit.size()) != g.n_outcome()) {
    throw InputError("need one key unit per outcome unit");
  }
  std::vector<local::Entry> entries;
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto set = g.intervention_set(m);
    if (set.empty()) {
      entries.emplace_back(local::PointMass{0});
      continue;
    }
    const auto it = std::lower_bound(set.begin(), set.end(), key_unit[m]);
    if (it == set.end() || *it != key_unit[m]) {
      throw InputError("key unit of outcome unit " + std::to_string(m + 1) +
                       " is not in its intervention set");
    }
    entries.emplace_back(
        local::KeyAssociated{static_cast<std::size_t>(it - set.begin()), arm, p});
  }
  return LocalPolicy(g, std::move(entries),
                     "key_associated(a=" + std::to_string(arm) + ", p=" + p.get_str() + ")");
}

LocalPolicy LocalPolicy::implied(const BipartiteGraph& g, Design global) {
  auto shared = std::make_shared<const Design>(std::move(global));
  std::vector<local::Entry> entries(static_cast<std::size_t>(g.n_outcome()),
                                    local::Implied{shared});
  return LocalPolicy(g, std::move(entries), "implied(" + shared->describe() + ")");
}

Rational LocalPolicy::prob(Index m, std::span<const std::uint8_t> local_values) const {
  if (local_values.size() != set_sizes_.at(m)) {
    throw InputError("local vector length does not match the intervention set");
  }
  if (local_values.size() > 64) throw EnumerationCapExceeded("intervention set larger than 64");
  LocalMask mask = 0;
  for (std::size_t i = 0; i < local_values.size(); ++i) {
    if (local_values[i] > 1) throw InputError("treatment values must be 0 or 1");
    if (local_values[i]) mask |= LocalMask{1} << i;
  }
  return prob(m, mask);
}

Rational LocalPolicy::prob(Index m, LocalMask mask) const {
  const auto bits = set_sizes_.at(m);
  return std::visit(
      [&](const auto& e) -> Rational {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, local::Bernoulli>) {
          return bernoulli_mass(e.alpha, bits, mask);
        } else if constexpr (std::is_same_v<T, local::PointMass>) {
          return mask == e.mask ? 1 : 0;
        } else if constexpr (std::is_same_v<T, local::KeyAssociated>) {
          const int key_value = static_cast<int>((mask >> e.key_position) & 1U);
          if (key_value != e.arm) return 0;
          Rational out = 1;
          const Rational complement = 1 - e.p;
          for (std::size_t i = 0; i < bits; ++i) {
            if (i == e.key_position) continue;
            out *= ((mask >> i) & 1U) ? e.p : complement;
          }
          return out;
        } else if constexpr (std::is_same_v<T, local::Implied>) {
          Assignment values(bits);
          for (std::size_t i = 0; i < bits; ++i) values[i] = (mask >> i) & 1U;
          return e.design->marginal_prob(sets_[m], values);
        } else {
          return e.probabilities.at(mask);
        }
      },
      entries_.at(m));
}

std::vector<Rational> LocalPolicy::table(Index m, std::size_t cap) const {
  const auto bits = set_sizes_.at(m);
  if (bits > cap) {
    throw EnumerationCapExceeded("intervention set of outcome unit " + std::to_string(m + 1) +
                                 " has " + std::to_string(bits) +
                                 " units, above the enumeration cap of " + std::to_string(cap));
  }
  if (const auto* implied = std::get_if<local::Implied>(&entries_.at(m))) {
    return implied->design->local_distribution(sets_[m], cap);
  }
  std::vector<Rational> out(std::size_t{1} << bits);
  for (LocalMask mask = 0; mask < out.size(); ++mask) out[mask] = prob(m, mask);
  return out;
}

bool is_implementable(const LocalPolicy& h, const Design& g_candidate, const BipartiteGraph& graph,
                      std::size_t cap) {
  if (g_candidate.n_units() != graph.n_intervention() || h.n_outcome() != graph.n_outcome()) {
    throw InputError("policy, design and graph dimensions differ");
  }
  for (Index m = 0; m < graph.n_outcome(); ++m) {
    const auto implied = g_candidate.local_distribution(graph.intervention_set(m), cap);
    const auto wanted = h.table(m, cap);
    for (std::size_t mask = 0; mask < implied.size(); ++mask) {
      if (std::abs(to_double(implied[mask] - wanted[mask])) > Tolerances::kImplementable) {
        return false;
      }
    }
  }
  return true;
}

local::Table target_exposure_policy(const BipartiteGraph& g, const BipartiteGraph& a_star,
                                    ExposureFunction f, Index m, const Rational& e_m,
                                    std::size_t cap) {
  if (a_star.n_intervention() != g.n_intervention() || a_star.n_outcome() != g.n_outcome()) {
    throw InputError("exposure adjacency must have the same dimensions as the graph");
  }
  const auto own = g.intervention_set(m);
  const auto exposure_set = a_star.intervention_set(m);
  // f only reads units in exposure_set, so the remaining units contribute a
  // common factor to every count and cancel after normalization.
  const auto joint = sorted_union(own, exposure_set);
  if (joint.size() > cap) {
    throw EnumerationCapExceeded("exposure enumeration over " + std::to_string(joint.size()) +
                                 " units exceeds the cap of " + std::to_string(cap));
  }
  std::vector<std::size_t> own_pos;
  std::vector<std::size_t> exposure_pos;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (std::binary_search(own.begin(), own.end(), joint[i])) own_pos.push_back(i);
    if (std::binary_search(exposure_set.begin(), exposure_set.end(), joint[i])) {
      exposure_pos.push_back(i);
    }
  }
  std::vector<Integer> counts(std::size_t{1} << own.size(), 0);
  Integer total = 0;
  for (LocalMask w = 0; w < (LocalMask{1} << joint.size()); ++w) {
    Index treated = 0;
    for (auto pos : exposure_pos) treated += static_cast<Index>((w >> pos) & 1U);
    Rational exposure;
    if (f == ExposureFunction::count_treated) {
      exposure = treated;
    } else {
      if (exposure_pos.empty()) continue;  // proportion undefined
      exposure = Rational(treated, static_cast<long>(exposure_pos.size()));
      exposure.canonicalize();
    }
    if (exposure != e_m) continue;
    LocalMask local = 0;
    for (std::size_t i = 0; i < own_pos.size(); ++i) {
      if ((w >> own_pos[i]) & 1U) local |= LocalMask{1} << i;
    }
    counts[local] += 1;
    total += 1;
  }
  if (total == 0) {
    throw InputError("exposure level " + e_m.get_str() + " is unattainable for outcome unit " +
                     std::to_string(m + 1));
  }
  local::Table table;
  table.probabilities.reserve(counts.size());
  for (const auto& c : counts) {
    Rational q(c, total);
    q.canonicalize();
    table.probabilities.push_back(q);
  }
  return table;
}

}  // namespace bipartite
