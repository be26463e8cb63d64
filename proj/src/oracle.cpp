#include "bipartite/oracle.hpp"

#include <algorithm>
#include <bit>

namespace bipartite {

namespace {

double mean_over(std::span<const Index> retained, const std::function<double(Index)>& value) {
  if (retained.empty()) throw EmptyRetainedSet("no outcome units retained after positivity screening");
  CompensatedSum sum;
  for (Index m : retained) sum.add(value(m));
  return sum.value() / static_cast<double>(retained.size());
}

double mean_at_arm(const BipartiteGraph& g, const PotentialOutcomeTable& po, int a,
                   std::span<const Index> retained) {
  return mean_over(retained, [&](Index m) {
    return po.value(m, a ? full_mask(g.intervention_set_size(m)) : 0);
  });
}

double observed_mean_at(const BipartiteGraph& g, const PotentialOutcomeTable& po,
                        std::span<const Index> retained, std::span<const std::uint8_t> w) {
  return mean_over(retained, [&](Index m) { return po.value(m, local_mask(g, m, w)); });
}

double policy_mean(const PotentialOutcomeTable& po, const LocalPolicy& h, std::span<const Index> retained) {
  return mean_over(retained, [&](Index m) {
    const auto table = h.table(m);
    CompensatedSum sum;
    for (LocalMask v = 0; v < table.size(); ++v) {
      if (table[v] != 0) sum.add(to_double(table[v]) * po.value(m, v));
    }
    return sum.value();
  });
}

}  // namespace

double exact_expectation_of(const Design& d, const std::function<double(const Assignment&)>& f,
                            std::size_t max_assignments) {
  CompensatedSum sum;
  for (const auto& [w, p] : d.enumerate(max_assignments)) sum.add(to_double(p) * f(w));
  return sum.value();
}

double exact_variance_of(const Design& d, const std::function<double(const Assignment&)>& f,
                         std::size_t max_assignments) {
  const auto support = d.enumerate(max_assignments);
  std::vector<double> values;
  values.reserve(support.size());
  CompensatedSum first;
  for (const auto& [w, p] : support) {
    values.push_back(f(w));
    first.add(to_double(p) * values.back());
  }
  const double mean = first.value();
  // Centered second moment: avoids cancellation in E[X^2] - E[X]^2.
  CompensatedSum second;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double dev = values[i] - mean;
    second.add(to_double(support[i].probability) * dev * dev);
  }
  return second.value();
}

bool is_random_estimand(EstimandKind kind) {
  return kind == EstimandKind::status_quo_vs_none || kind == EstimandKind::all_vs_status_quo ||
         kind == EstimandKind::stochastic_vs_observed || kind == EstimandKind::plus_k;
}

double plus_k_mean_bruteforce(const BipartiteGraph& g, const PotentialOutcomeTable& po, Index k,
                              std::span<const Index> retained, std::span<const std::uint8_t> w) {
  std::vector<Index> controls;
  for (Index n = 0; n < static_cast<Index>(w.size()); ++n) {
    if (w[n] == 0) controls.push_back(n);
  }
  if (k < 1 || k > static_cast<Index>(controls.size())) {
    throw InputError("K must lie between 1 and the number of controls");
  }
  std::vector<bool> pick(controls.size(), false);
  std::fill(pick.begin(), pick.begin() + k, true);
  Assignment flipped(w.begin(), w.end());
  CompensatedSum sum;
  Index subsets = 0;
  do {
    std::copy(w.begin(), w.end(), flipped.begin());
    for (std::size_t i = 0; i < controls.size(); ++i) {
      if (pick[i]) flipped[controls[i]] = 1;
    }
    sum.add(observed_mean_at(g, po, retained, flipped));
    ++subsets;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return sum.value() / static_cast<double>(subsets);
}

namespace {

// Per-unit form of the +K mean: for each j, the j promoted units inside N_m
// can be any j of its controls, and the other K - j come from the controls
// outside N_m.
double plus_k_mean(const BipartiteGraph& g, const PotentialOutcomeTable& po, Index k,
                   std::span<const Index> retained, std::span<const std::uint8_t> w) {
  const Index n_control = static_cast<Index>(std::count(w.begin(), w.end(), 0));
  if (k < 1 || k > n_control) throw InputError("K must lie between 1 and the number of controls");
  const Rational total_ways(binomial(n_control, k));
  return mean_over(retained, [&](Index m) {
    const LocalMask mask = local_mask(g, m, w);
    const auto bits = g.intervention_set_size(m);
    const LocalMask zeros = full_mask(bits) & ~mask;
    const auto control_here = static_cast<Index>(std::popcount(zeros));
    CompensatedSum sum;
    for (LocalMask sub = zeros;; sub = (sub - 1) & zeros) {
      const auto j = static_cast<Index>(std::popcount(sub));
      const Integer ways = binomial(n_control - control_here, k - j);
      if (j <= k && ways != 0) sum.add(to_double(Rational(ways) / total_ways) * po.value(m, mask | sub));
      if (sub == 0) break;
    }
    return sum.value();
  });
}

}  // namespace

double estimand_value(const BipartiteGraph& g, const Design& /*d*/, const PotentialOutcomeTable& po,
                      const EstimandSpec& spec, std::span<const Index> retained,
                      std::span<const std::uint8_t> w) {
  switch (spec.kind) {
    case EstimandKind::mean_po: return mean_at_arm(g, po, spec.arm, retained);
    case EstimandKind::all_or_none:
      return mean_at_arm(g, po, 1, retained) - mean_at_arm(g, po, 0, retained);
    case EstimandKind::status_quo_vs_none:
      return observed_mean_at(g, po, retained, w) - mean_at_arm(g, po, 0, retained);
    case EstimandKind::all_vs_status_quo:
      return mean_at_arm(g, po, 1, retained) - observed_mean_at(g, po, retained, w);
    case EstimandKind::stochastic: return policy_mean(po, *spec.h, retained);
    case EstimandKind::stochastic_vs_observed:
      return policy_mean(po, *spec.h, retained) - observed_mean_at(g, po, retained, w);
    case EstimandKind::stochastic_contrast:
      return policy_mean(po, *spec.h_prime, retained) - policy_mean(po, *spec.h, retained);
    case EstimandKind::plus_k:
      return plus_k_mean(g, po, spec.k, retained, w) - observed_mean_at(g, po, retained, w);
  }
  return 0.0;
}

double exact_estimand(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                      const EstimandSpec& spec, std::span<const Index> retained) {
  if (is_random_estimand(spec.kind)) {
    throw PreconditionError(spec.id() + " is a random estimand; evaluate it per assignment");
  }
  return estimand_value(g, d, po, spec, retained, Assignment(static_cast<std::size_t>(g.n_intervention()), 0));
}

double estimator_at(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                    const EstimandSpec& spec, std::span<const Index> retained, const Assignment& w) {
  const ObservedExperiment exp(g, d, w, po.observe(g, w));
  return point_estimate(exp, spec, retained);
}

double exact_expectation(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                         const EstimandSpec& spec, std::span<const Index> retained,
                         std::size_t max_assignments) {
  return exact_expectation_of(
      d, [&](const Assignment& w) { return estimator_at(g, d, po, spec, retained, w); }, max_assignments);
}

double exact_bias(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                  const EstimandSpec& spec, std::span<const Index> retained, std::size_t max_assignments) {
  return exact_expectation_of(
      d,
      [&](const Assignment& w) {
        return estimator_at(g, d, po, spec, retained, w) - estimand_value(g, d, po, spec, retained, w);
      },
      max_assignments);
}

double exact_variance(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                      const EstimandSpec& spec, std::span<const Index> retained,
                      std::size_t max_assignments) {
  return exact_variance_of(
      d, [&](const Assignment& w) { return estimator_at(g, d, po, spec, retained, w); }, max_assignments);
}

double exact_error_variance(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                            const EstimandSpec& spec, std::span<const Index> retained,
                            std::size_t max_assignments) {
  return exact_variance_of(
      d,
      [&](const Assignment& w) {
        return estimator_at(g, d, po, spec, retained, w) - estimand_value(g, d, po, spec, retained, w);
      },
      max_assignments);
}

double exact_expected_variance_bound(const BipartiteGraph& g, const Design& d,
                                     const PotentialOutcomeTable& po, const EstimandSpec& spec,
                                     std::span<const Index> retained, const VarianceOptions& options,
                                     std::size_t max_assignments) {
  return exact_expectation_of(
      d,
      [&](const Assignment& w) {
        const ObservedExperiment exp(g, d, w, po.observe(g, w));
        const auto v = estimate_variance(exp, spec, retained, options);
        if (!v) throw PreconditionError(spec.id() + " has no variance estimator");
        return *v;
      },
      max_assignments);
}

}  // namespace bipartite
