#include "bipartite/potential_outcomes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

namespace bipartite {

PotentialOutcomeTable::PotentialOutcomeTable(const BipartiteGraph& g,
                                             std::vector<std::vector<double>> values)
    : values_(std::move(values)) {
  if (static_cast<Index>(values_.size()) != g.n_outcome()) {
    throw InputError("potential outcome table needs one entry per outcome unit");
  }
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto bits = g.intervention_set_size(m);
    if (bits >= 63 || values_[m].size() != (std::size_t{1} << bits)) {
      throw InputError("potential outcome table for outcome unit " + std::to_string(m + 1) +
                       " must have 2^N_m entries");
    }
    for (double v : values_[m]) {
      if (!std::isfinite(v)) throw InputError("potential outcomes must be finite");
    }
  }
}

Vector PotentialOutcomeTable::observe(const BipartiteGraph& g, std::span<const std::uint8_t> w) const {
  if (static_cast<Index>(w.size()) != g.n_intervention()) {
    throw InputError("treatment vector length does not match the graph");
  }
  Vector y(n_outcome());
  for (Index m = 0; m < n_outcome(); ++m) y[m] = values_[m][local_mask(g, m, w)];
  return y;
}

double PotentialOutcomeTable::bound() const {
  double b = 0.0;
  for (const auto& unit : values_) {
    for (double v : unit) b = std::max(b, std::abs(v));
  }
  return b;
}

std::string to_string(OutcomeFamily family) {
  switch (family) {
    case OutcomeFamily::constant: return "constant";
    case OutcomeFamily::additive: return "additive";
    case OutcomeFamily::saturating: return "saturating";
    case OutcomeFamily::interaction: return "interaction";
  }
  return "constant";
}

OutcomeFamily parse_outcome_family(const std::string& name) {
  if (name == "constant") return OutcomeFamily::constant;
  if (name == "additive") return OutcomeFamily::additive;
  if (name == "saturating") return OutcomeFamily::saturating;
  if (name == "interaction") return OutcomeFamily::interaction;
  throw InputError("unknown outcome family '" + name + "'");
}

PotentialOutcomeTable make_outcome_table(const BipartiteGraph& g, OutcomeFamily family,
                                         std::uint64_t seed, std::size_t cap) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> beta(static_cast<std::size_t>(g.n_intervention()));
  for (auto& b : beta) b = normal(rng);

  std::vector<std::vector<double>> values(static_cast<std::size_t>(g.n_outcome()));
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto set = g.intervention_set(m);
    if (set.size() > cap) {
      throw EnumerationCapExceeded("outcome unit " + std::to_string(m + 1) +
                                   " has too many intervention units for a full table");
    }
    const double intercept = 2.0 * normal(rng);
    const double scale = normal(rng);
    const double gain = 1.5 * normal(rng);
    const double drag = normal(rng);
    auto& unit = values[m];
    unit.resize(std::size_t{1} << set.size());
    for (LocalMask mask = 0; mask < unit.size(); ++mask) {
      const auto treated = static_cast<double>(std::popcount(mask));
      double linear = 0.0;
      for (std::size_t i = 0; i < set.size(); ++i) {
        if ((mask >> i) & 1U) linear += beta[set[i]];
      }
      double y = intercept;
      switch (family) {
        case OutcomeFamily::constant:
          break;
        case OutcomeFamily::additive:
          y += linear;
          break;
        case OutcomeFamily::saturating:
          if (!set.empty()) y += scale * std::min(1.0, 2.0 * treated / set.size());
          break;
        case OutcomeFamily::interaction: {
          y += linear;
          if (!set.empty() && mask == full_mask(set.size())) y += gain;
          if (set.size() >= 2 && (mask & 1U) && ((mask >> (set.size() - 1)) & 1U)) y -= drag;
          break;
        }
      }
      unit[mask] = y;
    }
  }
  return PotentialOutcomeTable(g, std::move(values));
}

}  // namespace bipartite
