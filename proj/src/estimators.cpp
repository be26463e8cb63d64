#include "bipartite/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace bipartite {

ObservedExperiment::ObservedExperiment(const BipartiteGraph& g, const Design& d, Assignment w,
                                       Vector y)
    : graph_(&g), design_(&d), w_(std::move(w)), y_(std::move(y)) {
  if (static_cast<Index>(w_.size()) != g.n_intervention()) {
    throw InputError("treatment vector has " + std::to_string(w_.size()) + " entries, graph has " +
                     std::to_string(g.n_intervention()) + " intervention units");
  }
  if (y_.size() != g.n_outcome()) {
    throw InputError("outcome vector has " + std::to_string(y_.size()) + " entries, graph has " +
                     std::to_string(g.n_outcome()) + " outcome units");
  }
  if (d.n_units() != g.n_intervention()) throw InputError("design size does not match the graph");
  for (auto v : w_) {
    if (v > 1) throw InputError("treatment values must be 0 or 1");
  }
  for (Index m = 0; m < g.n_outcome(); ++m) {
    if (!std::isfinite(y_[m])) throw InputError("outcome " + std::to_string(m + 1) + " is not finite");
  }
  if (d.probability_of(w_) == 0) {
    throw InputError("observed assignment has probability zero under the design");
  }
  const auto M = static_cast<std::size_t>(g.n_outcome());
  masks_.resize(M);
  propensity_.resize(M);
  propensity_d_.resize(M);
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto set = g.intervention_set(m);
    masks_[m] = set.size() <= 64 ? local_mask(g, m, w_) : 0;
    Assignment local(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) local[i] = w_[set[i]];
    propensity_[m] = d.marginal_prob(set, local);
    propensity_d_[m] = to_double(propensity_[m]);
  }
}

bool ObservedExperiment::at_arm(Index m, int a) const {
  for (Index n : graph_->intervention_set(m)) {
    if (w_[n] != a) return false;
  }
  return true;
}

namespace {

std::string arm_condition(int a) { return "pi_N(" + std::to_string(a) + ")=0"; }

bool arm_possible(const BipartiteGraph& g, const Design& d, Index m, int a) {
  const auto set = g.intervention_set(m);
  Assignment values(set.size(), static_cast<std::uint8_t>(a));
  return d.is_possible(set, values);
}

bool richer_closed(const std::vector<Rational>& table, std::size_t bits) {
  for (LocalMask mask = 0; mask < table.size(); ++mask) {
    if (table[mask] == 0) continue;
    for (std::size_t i = 0; i < bits; ++i) {
      const LocalMask up = mask | (LocalMask{1} << i);
      if (up != mask && table[up] == 0) return false;
    }
  }
  return true;
}

void check_plus_k(const Design& d, Index k) {
  const auto treated = d.fixed_treated_count();
  if (!treated) {
    throw PreconditionError("+K estimation needs a design that fixes the number of treated units");
  }
  const Index controls = d.n_units() - *treated;
  if (controls < 1) throw PreconditionError("+K estimation needs at least one control unit");
  if (k > controls) {
    throw InputError("K = " + std::to_string(k) + " exceeds the " + std::to_string(controls) +
                     " control units");
  }
}

void require_nonempty(std::span<const Index> retained) {
  if (retained.empty()) throw EmptyRetainedSet("no outcome units retained after positivity screening");
}

}  // namespace

PositivityReport screen_positivity(const BipartiteGraph& g, const Design& d, const EstimandSpec& spec,
                                   std::size_t cap) {
  if (d.n_units() != g.n_intervention()) throw InputError("design size does not match the graph");
  if (spec.kind == EstimandKind::plus_k) check_plus_k(d, spec.k);
  PositivityReport report;
  report.estimand_id = spec.id();
  for (Index m = 0; m < g.n_outcome(); ++m) {
    std::string failed;
    switch (spec.kind) {
      case EstimandKind::mean_po:
        if (!arm_possible(g, d, m, spec.arm)) failed = arm_condition(spec.arm);
        break;
      case EstimandKind::all_or_none:
        if (!arm_possible(g, d, m, 0)) {
          failed = arm_condition(0);
        } else if (!arm_possible(g, d, m, 1)) {
          failed = arm_condition(1);
        }
        break;
      case EstimandKind::status_quo_vs_none:
        if (!arm_possible(g, d, m, 0)) failed = arm_condition(0);
        break;
      case EstimandKind::all_vs_status_quo:
        if (!arm_possible(g, d, m, 1)) failed = arm_condition(1);
        break;
      case EstimandKind::stochastic:
      case EstimandKind::stochastic_vs_observed:
      case EstimandKind::stochastic_contrast: {
        const auto pi = d.local_distribution(g.intervention_set(m), cap);
        const auto h = spec.h->table(m, cap);
        std::vector<Rational> h2;
        if (spec.kind == EstimandKind::stochastic_contrast) h2 = spec.h_prime->table(m, cap);
        for (LocalMask mask = 0; mask < pi.size(); ++mask) {
          const bool needed = h[mask] > 0 || (!h2.empty() && h2[mask] > 0);
          if (needed && pi[mask] == 0) {
            failed = "pi_N(w)=0 where h(w)>0";
            break;
          }
        }
        break;
      }
      case EstimandKind::plus_k: {
        const auto set = g.intervention_set(m);
        if (!richer_closed(d.local_distribution(set, cap), set.size())) {
          failed = "richer-vector condition fails";
        }
        break;
      }
    }
    if (failed.empty()) {
      report.retained.push_back(m);
    } else {
      report.excluded.push_back({m, std::move(failed)});
    }
  }
  return report;
}

std::vector<Index> common_retained(std::span<const PositivityReport> reports) {
  if (reports.empty()) return {};
  std::vector<Index> out = reports.front().retained;
  for (const auto& r : reports.subspan(1)) {
    std::vector<Index> next;
    std::set_intersection(out.begin(), out.end(), r.retained.begin(), r.retained.end(),
                          std::back_inserter(next));
    out = std::move(next);
  }
  return out;
}

std::optional<double> EstimateReport::standard_error() const {
  if (!variance_bound) return std::nullopt;
  return std::sqrt(std::max(0.0, *variance_bound));
}

double observed_mean(const ObservedExperiment& exp, std::span<const Index> retained) {
  require_nonempty(retained);
  CompensatedSum sum;
  for (Index m : retained) sum.add(exp.y()[m]);
  return sum.value() / static_cast<double>(retained.size());
}

double estimate_mean_po(const ObservedExperiment& exp, int a, std::span<const Index> retained) {
  require_nonempty(retained);
  CompensatedSum sum;
  for (Index m : retained) {
    if (exp.at_arm(m, a)) sum.add(exp.y()[m] / exp.propensity_d(m));
  }
  return sum.value() / static_cast<double>(retained.size());
}

double estimate_stochastic(const ObservedExperiment& exp, const LocalPolicy& h,
                           std::span<const Index> retained) {
  require_nonempty(retained);
  if (h.n_outcome() != exp.graph().n_outcome()) throw InputError("policy does not match the graph");
  CompensatedSum sum;
  for (Index m : retained) {
    const Rational weight = h.prob(m, exp.mask(m)) / exp.propensity(m);
    sum.add(to_double(weight) * exp.y()[m]);
  }
  return sum.value() / static_cast<double>(retained.size());
}

double estimate_stochastic_contrast(const ObservedExperiment& exp, const LocalPolicy& h,
                                    const LocalPolicy& h_prime, std::span<const Index> retained) {
  return estimate_stochastic(exp, h_prime, retained) - estimate_stochastic(exp, h, retained);
}

Rational rho_weight_exact(const ObservedExperiment& exp, Index m, Index k) {
  const auto& d = exp.design();
  check_plus_k(d, k);
  const Index n_control = d.n_units() - *d.fixed_treated_count();
  const auto set = exp.graph().intervention_set(m);
  if (set.size() > 62) throw EnumerationCapExceeded("intervention set too large for +K weights");
  const LocalMask mask = exp.mask(m);
  const auto treated_here = static_cast<Index>(std::popcount(mask));
  const auto control_here = static_cast<Index>(set.size()) - treated_here;

  // Sum over ways the design vector had k fewer treated units inside N_m and
  // the K promotions covered those k units plus K - k controls outside N_m.
  std::vector<Rational> by_k(static_cast<std::size_t>(std::min(k, treated_here)) + 1, 0);
  Assignment values(set.size());
  for (LocalMask sub = mask;; sub = (sub - 1) & mask) {
    const auto flipped = static_cast<Index>(std::popcount(sub));
    if (flipped <= k) {
      const LocalMask before = mask & ~sub;
      for (std::size_t i = 0; i < set.size(); ++i) values[i] = (before >> i) & 1U;
      by_k[flipped] += d.marginal_prob(set, values);
    }
    if (sub == 0) break;
  }
  Rational total = 0;
  for (Index j = 0; j < static_cast<Index>(by_k.size()); ++j) {
    total += Rational(binomial(n_control - control_here - j, k - j)) * by_k[j];
  }
  Rational out = total / (Rational(binomial(n_control, k)) * exp.propensity(m));
  out.canonicalize();
  return out;
}

double rho_weight(const ObservedExperiment& exp, Index m, Index k) {
  return to_double(rho_weight_exact(exp, m, k));
}

double estimate_plus_k_mean(const ObservedExperiment& exp, Index k, std::span<const Index> retained) {
  require_nonempty(retained);
  check_plus_k(exp.design(), k);
  CompensatedSum sum;
  for (Index m : retained) sum.add(rho_weight(exp, m, k) * exp.y()[m]);
  return sum.value() / static_cast<double>(retained.size());
}

double point_estimate(const ObservedExperiment& exp, const EstimandSpec& spec,
                      std::span<const Index> retained) {
  switch (spec.kind) {
    case EstimandKind::mean_po: return estimate_mean_po(exp, spec.arm, retained);
    case EstimandKind::all_or_none:
      return estimate_mean_po(exp, 1, retained) - estimate_mean_po(exp, 0, retained);
    case EstimandKind::status_quo_vs_none:
      return observed_mean(exp, retained) - estimate_mean_po(exp, 0, retained);
    case EstimandKind::all_vs_status_quo:
      return estimate_mean_po(exp, 1, retained) - observed_mean(exp, retained);
    case EstimandKind::stochastic: return estimate_stochastic(exp, *spec.h, retained);
    case EstimandKind::stochastic_vs_observed:
      return estimate_stochastic(exp, *spec.h, retained) - observed_mean(exp, retained);
    case EstimandKind::stochastic_contrast:
      return estimate_stochastic_contrast(exp, *spec.h, *spec.h_prime, retained);
    case EstimandKind::plus_k:
      return estimate_plus_k_mean(exp, spec.k, retained) - observed_mean(exp, retained);
  }
  return 0.0;
}

Index effective_units(const ObservedExperiment& exp, const EstimandSpec& spec,
                      std::span<const Index> retained) {
  Index count = 0;
  for (Index m : retained) {
    bool used = false;
    switch (spec.kind) {
      case EstimandKind::mean_po: used = exp.at_arm(m, spec.arm); break;
      case EstimandKind::all_or_none: used = exp.at_arm(m, 0) || exp.at_arm(m, 1); break;
      case EstimandKind::status_quo_vs_none: used = exp.at_arm(m, 0); break;
      case EstimandKind::all_vs_status_quo: used = exp.at_arm(m, 1); break;
      case EstimandKind::stochastic:
      case EstimandKind::stochastic_vs_observed: used = spec.h->prob(m, exp.mask(m)) != 0; break;
      case EstimandKind::stochastic_contrast:
        used = spec.h->prob(m, exp.mask(m)) != spec.h_prime->prob(m, exp.mask(m));
        break;
      case EstimandKind::plus_k: used = rho_weight_exact(exp, m, spec.k) != 0; break;
    }
    if (used) ++count;
  }
  return count;
}

}  // namespace bipartite
