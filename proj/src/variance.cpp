#include "bipartite/variance.hpp"

#include <algorithm>
#include <cmath>

namespace bipartite {

namespace {

Assignment constant(std::size_t n, int a) { return Assignment(n, static_cast<std::uint8_t>(a)); }

Rational arm_prob(const BipartiteGraph& g, const Design& d, Index m, int a) {
  const auto set = g.intervention_set(m);
  return d.marginal_prob(set, constant(set.size(), a));
}

Rational union_arm_prob(const BipartiteGraph& g, const Design& d, Index m, Index mp, int a) {
  const auto u = sorted_union(g.intervention_set(m), g.intervention_set(mp));
  return d.marginal_prob(u, constant(u.size(), a));
}

Rational mixed_prob(const BipartiteGraph& g, const Design& d, Index m, Index mp) {
  const auto s0 = g.intervention_set(m);
  const auto s1 = g.intervention_set(mp);
  return d.joint_prob(s0, constant(s0.size(), 0), s1, constant(s1.size(), 1));
}

bool mixed_possible(const BipartiteGraph& g, const Design& d, Index m, Index mp) {
  const auto s0 = g.intervention_set(m);
  const auto s1 = g.intervention_set(mp);
  return d.joint_possible(s0, constant(s0.size(), 0), s1, constant(s1.size(), 1));
}

bool union_arm_possible(const BipartiteGraph& g, const Design& d, Index m, Index mp, int a) {
  const auto s0 = g.intervention_set(m);
  const auto s1 = g.intervention_set(mp);
  return d.joint_possible(s0, constant(s0.size(), a), s1, constant(s1.size(), a));
}

// Pairs whose sets are disjoint under a design with independent units carry
// independent assignments: every pair term vanishes and no joint event is
// impossible unless one margin already is.
bool independent_pair(const BipartiteGraph& g, const Design& d, Index m, Index mp) {
  return d.independent_units() &&
         intersection_size(g.intervention_set(m), g.intervention_set(mp)) == 0;
}

// Partners m' of m worth visiting in a pair sum over `pool`. Under a design
// with independent units only units sharing an intervention unit with m can
// have a nonzero pair term, so the rest are skipped.
class PairScope {
 public:
  PairScope(const BipartiteGraph& g, const Design& d, std::span<const Index> pool)
      : g_(&g), independent_(d.independent_units()), pool_(pool) {
    if (independent_) {
      in_pool_.assign(static_cast<std::size_t>(g.n_outcome()), 0);
      stamp_.assign(static_cast<std::size_t>(g.n_outcome()), 0);
      for (Index m : pool) in_pool_[m] = 1;
    }
  }

  bool sparse() const { return independent_; }

  template <class F>
  void each(Index m, F&& f) {
    if (!independent_) {
      for (Index mp : pool_) {
        if (mp != m) f(mp);
      }
      return;
    }
    ++generation_;
    for (Index n : g_->intervention_set(m)) {
      for (Index mp : g_->outcome_set(n)) {
        if (mp == m || !in_pool_[mp] || stamp_[mp] == generation_) continue;
        stamp_[mp] = generation_;
        f(mp);
      }
    }
  }

 private:
  const BipartiteGraph* g_;
  bool independent_;
  std::span<const Index> pool_;
  std::vector<std::uint8_t> in_pool_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t generation_ = 0;
};

double scale(std::span<const Index> retained) {
  if (retained.empty()) throw EmptyRetainedSet("no outcome units retained after positivity screening");
  const auto r = static_cast<double>(retained.size());
  return 1.0 / (r * r);
}

void require_positive(const Rational& p, Index m, const char* what) {
  if (p == 0) {
    throw PreconditionError(std::string(what) + " is zero for retained outcome unit " +
                            std::to_string(m + 1));
  }
}

// pi_{S1,S2}(w1, w2) for all local vectors, row-major in w1.
std::vector<Rational> pair_table(const Design& d, std::span<const Index> s1, std::span<const Index> s2,
                                 std::size_t cap) {
  const auto u = sorted_union(s1, s2);
  const auto dist = d.local_distribution(u, cap);
  std::vector<std::size_t> pos1;
  std::vector<std::size_t> pos2;
  for (Index n : s1) pos1.push_back(std::lower_bound(u.begin(), u.end(), n) - u.begin());
  for (Index n : s2) pos2.push_back(std::lower_bound(u.begin(), u.end(), n) - u.begin());
  const std::size_t cols = std::size_t{1} << s2.size();
  std::vector<Rational> out((std::size_t{1} << s1.size()) * cols, 0);
  for (LocalMask mask = 0; mask < dist.size(); ++mask) {
    if (dist[mask] == 0) continue;
    LocalMask w1 = 0;
    LocalMask w2 = 0;
    for (std::size_t i = 0; i < pos1.size(); ++i) w1 |= ((mask >> pos1[i]) & 1U) << i;
    for (std::size_t i = 0; i < pos2.size(); ++i) w2 |= ((mask >> pos2[i]) & 1U) << i;
    out[w1 * cols + w2] += dist[mask];
  }
  return out;
}

// Exact variance of sum_m (q_m(W)/pi_m(W)) Y_m(W), where q is either
// h or the signed difference h' - h.
double weighted_true_variance(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                              const std::vector<std::vector<Rational>>& q,
                              std::span<const Index> retained, std::size_t cap) {
  const double factor = scale(retained);
  std::vector<std::vector<Rational>> pi(retained.size());
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    pi[i] = d.local_distribution(g.intervention_set(m), cap);
    for (LocalMask w = 0; w < pi[i].size(); ++w) {
      if (q[i][w] != 0 && pi[i][w] == 0) {
        throw PreconditionError("stochastic positivity fails for retained outcome unit " +
                                std::to_string(m + 1));
      }
    }
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    const auto& p = pi[i];
    for (LocalMask w = 0; w < p.size(); ++w) {
      if (q[i][w] == 0) continue;
      const double y = po.value(m, w);
      const Rational r = q[i][w] / p[w];
      total.add(to_double(p[w] * (1 - p[w]) * r * r) * y * y);
      for (LocalMask v = 0; v < p.size(); ++v) {
        if (v == w || q[i][v] == 0) continue;
        total.add(-to_double(q[i][w] * q[i][v]) * y * po.value(m, v));
      }
    }
  }
  for (std::size_t i = 0; i < retained.size(); ++i) {
    for (std::size_t j = 0; j < retained.size(); ++j) {
      if (i == j) continue;
      const Index m = retained[i];
      const Index mp = retained[j];
      if (independent_pair(g, d, m, mp)) continue;
      const auto joint = pair_table(d, g.intervention_set(m), g.intervention_set(mp), cap);
      const std::size_t cols = pi[j].size();
      for (LocalMask w = 0; w < pi[i].size(); ++w) {
        if (q[i][w] == 0) continue;
        for (LocalMask v = 0; v < cols; ++v) {
          if (q[j][v] == 0) continue;
          const Rational ratio = joint[w * cols + v] / (pi[i][w] * pi[j][v]) - 1;
          if (ratio == 0) continue;
          total.add(to_double(ratio * q[i][w] * q[j][v]) * po.value(m, w) * po.value(mp, v));
        }
      }
    }
  }
  return factor * total.value();
}

std::vector<std::vector<Rational>> policy_tables(const LocalPolicy& h, std::span<const Index> retained,
                                                 std::size_t cap) {
  std::vector<std::vector<Rational>> out;
  out.reserve(retained.size());
  for (Index m : retained) out.push_back(h.table(m, cap));
  return out;
}

}  // namespace

std::vector<PairClassification> classify_pairs_arm(const BipartiteGraph& g, const Design& d, int a,
                                                   std::span<const Index> retained) {
  std::vector<PairClassification> out;
  for (Index m : retained) {
    for (Index mp : retained) {
      if (m == mp) continue;
      out.push_back({m, mp, union_arm_possible(g, d, m, mp, a)});
    }
  }
  return out;
}

std::vector<PairClassification> classify_pairs_mixed(const BipartiteGraph& g, const Design& d,
                                                     std::span<const Index> retained) {
  std::vector<PairClassification> out;
  for (Index m : retained) {
    for (Index mp : retained) out.push_back({m, mp, mixed_possible(g, d, m, mp)});
  }
  return out;
}

double true_variance_mean_po(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                             int a, std::span<const Index> retained) {
  const double factor = scale(retained);
  const auto R = static_cast<Eigen::Index>(retained.size());
  std::vector<Rational> pi(retained.size());
  Vector u(R);
  for (Eigen::Index i = 0; i < R; ++i) {
    const Index m = retained[i];
    pi[i] = arm_prob(g, d, m, a);
    require_positive(pi[i], m, "pi_N(a)");
    u[i] = po.value(m, a ? full_mask(g.intervention_set_size(m)) : 0) / to_double(pi[i]);
  }
  Matrix c = Matrix::Zero(R, R);
  for (Eigen::Index i = 0; i < R; ++i) {
    c(i, i) = to_double(pi[i] * (1 - pi[i]));
    for (Eigen::Index j = i + 1; j < R; ++j) {
      if (independent_pair(g, d, retained[i], retained[j])) continue;
      const double cij = to_double(union_arm_prob(g, d, retained[i], retained[j], a) - pi[i] * pi[j]);
      c(i, j) = cij;
      c(j, i) = cij;
    }
  }
  return factor * u.dot(c * u);
}

double true_covariance_aon(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                           std::span<const Index> retained) {
  const double factor = scale(retained);
  std::vector<Rational> p0(retained.size());
  std::vector<Rational> p1(retained.size());
  std::vector<double> y0(retained.size());
  std::vector<double> y1(retained.size());
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    p0[i] = arm_prob(g, d, m, 0);
    p1[i] = arm_prob(g, d, m, 1);
    require_positive(p0[i], m, "pi_N(0)");
    require_positive(p1[i], m, "pi_N(1)");
    y0[i] = po.value(m, 0);
    y1[i] = po.value(m, full_mask(g.intervention_set_size(m)));
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    for (std::size_t j = 0; j < retained.size(); ++j) {
      const Index m = retained[i];
      const Index mp = retained[j];
      if (i != j && independent_pair(g, d, m, mp)) continue;
      const Rational joint = mixed_prob(g, d, m, mp);
      if (joint != 0) {
        total.add(to_double((joint - p0[i] * p1[j]) / (p0[i] * p1[j])) * y0[i] * y1[j]);
      } else {
        total.add(-y0[i] * y1[j]);
      }
    }
  }
  return factor * total.value();
}

double true_variance_aon(const BipartiteGraph& g, const Design& d, const PotentialOutcomeTable& po,
                         std::span<const Index> retained) {
  return true_variance_mean_po(g, d, po, 0, retained) + true_variance_mean_po(g, d, po, 1, retained) -
         2.0 * true_covariance_aon(g, d, po, retained);
}

double true_variance_stochastic(const BipartiteGraph& g, const Design& d,
                                const PotentialOutcomeTable& po, const LocalPolicy& h,
                                std::span<const Index> retained, std::size_t cap) {
  return weighted_true_variance(g, d, po, policy_tables(h, retained, cap), retained, cap);
}

double true_variance_stochastic_contrast(const BipartiteGraph& g, const Design& d,
                                         const PotentialOutcomeTable& po, const LocalPolicy& h,
                                         const LocalPolicy& h_prime, std::span<const Index> retained,
                                         std::size_t cap) {
  auto q = policy_tables(h_prime, retained, cap);
  const auto base = policy_tables(h, retained, cap);
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t w = 0; w < q[i].size(); ++w) q[i][w] -= base[i][w];
  }
  return weighted_true_variance(g, d, po, q, retained, cap);
}

double estimate_variance_mean_po(const ObservedExperiment& exp, int a, std::span<const Index> retained,
                                 bool same_sign) {
  const double factor = scale(retained);
  const auto& g = exp.graph();
  const auto& d = exp.design();
  const auto& y = exp.y();
  std::vector<Index> active;
  for (Index m : retained) {
    if (exp.at_arm(m, a)) active.push_back(m);
  }
  CompensatedSum total;
  for (Index m : active) {
    const double p = exp.propensity_d(m);
    total.add((1.0 - p) / (p * p) * y[m] * y[m]);
  }
  // Pairs that are jointly at arm a under the realized assignment.
  PairScope active_pairs(g, d, active);
  for (Index m : active) {
    active_pairs.each(m, [&](Index mp) {
      if (independent_pair(g, d, m, mp)) return;
      const Rational pu = union_arm_prob(g, d, m, mp, a);
      const Rational prod = exp.propensity(m) * exp.propensity(mp);
      total.add(to_double((1 - prod / pu) / prod) * y[m] * y[mp]);
    });
  }
  if (!same_sign) {
    PairScope retained_pairs(g, d, retained);
    // Outside the visited partners a pair is impossible only through a
    // margin of m' that is already impossible.
    Index margin_impossible = 0;
    std::vector<std::uint8_t> margin_ok(static_cast<std::size_t>(g.n_outcome()), 1);
    if (retained_pairs.sparse()) {
      for (Index mp : retained) {
        if (arm_prob(g, d, mp, a) == 0) {
          margin_ok[mp] = 0;
          ++margin_impossible;
        }
      }
    }
    for (Index m : active) {
      Index impossible = 0;
      Index visited_margin_impossible = 0;
      retained_pairs.each(m, [&](Index mp) {
        if (!union_arm_possible(g, d, m, mp, a)) ++impossible;
        if (!margin_ok[mp]) ++visited_margin_impossible;
      });
      impossible += margin_impossible - visited_margin_impossible;
      total.add(static_cast<double>(impossible) * y[m] * y[m] / exp.propensity_d(m));
    }
  }
  return factor * total.value();
}

double estimate_covariance_lb(const ObservedExperiment& exp, std::span<const Index> retained,
                              bool include_diagonal) {
  const double factor = scale(retained);
  const auto& g = exp.graph();
  const auto& d = exp.design();
  const auto& y = exp.y();
  CompensatedSum total;
  PairScope pairs(g, d, retained);
  const auto add_pair = [&](Index m, Index mp) {
    if (!exp.at_arm(mp, 1)) return;
    if (m != mp && independent_pair(g, d, m, mp)) return;
    const Rational joint = mixed_prob(g, d, m, mp);
    if (joint == 0) return;
    const Rational prod = exp.propensity(m) * exp.propensity(mp);
    total.add(to_double((1 - prod / joint) / prod) * y[m] * y[mp]);
  };
  for (Index m : retained) {
    if (!exp.at_arm(m, 0)) continue;
    add_pair(m, m);
    pairs.each(m, [&](Index mp) { add_pair(m, mp); });
  }
  // Pairs that can never be observed together: -1/2 (Y^2/pi0 + Y'^2/pi1).
  // Unvisited pairs are independent, so only an impossible margin of the
  // partner makes them impossible.
  Index margin0_impossible = 0;
  Index margin1_impossible = 0;
  std::vector<std::uint8_t> ok0(static_cast<std::size_t>(g.n_outcome()), 1);
  std::vector<std::uint8_t> ok1(static_cast<std::size_t>(g.n_outcome()), 1);
  if (pairs.sparse()) {
    for (Index mp : retained) {
      if (arm_prob(g, d, mp, 0) == 0) {
        ok0[mp] = 0;
        ++margin0_impossible;
      }
      if (arm_prob(g, d, mp, 1) == 0) {
        ok1[mp] = 0;
        ++margin1_impossible;
      }
    }
  }
  CompensatedSum bound;
  for (Index m : retained) {
    const bool zero = exp.at_arm(m, 0);
    const bool one = exp.at_arm(m, 1);
    if (!zero && !one) continue;
    Index as_first = 0;
    Index as_second = 0;
    if (include_diagonal) {
      if (zero && !mixed_possible(g, d, m, m)) ++as_first;
      if (one && !mixed_possible(g, d, m, m)) ++as_second;
    }
    Index seen0 = 0;
    Index seen1 = 0;
    pairs.each(m, [&](Index mp) {
      if (zero && !mixed_possible(g, d, m, mp)) ++as_first;
      if (one && !mixed_possible(g, d, mp, m)) ++as_second;
      seen0 += !ok0[mp];
      seen1 += !ok1[mp];
    });
    // m is at arm 0 (or 1) so its own margin is possible; m' supplies the other.
    if (zero) as_first += margin1_impossible - seen1 - (!ok1[m] ? 1 : 0);
    if (one) as_second += margin0_impossible - seen0 - (!ok0[m] ? 1 : 0);
    const double y2 = y[m] * y[m] / exp.propensity_d(m);
    bound.add(static_cast<double>(as_first + as_second) * y2);
  }
  return factor * (total.value() - 0.5 * bound.value());
}

double estimate_variance_aon(const ObservedExperiment& exp, std::span<const Index> retained,
                             const VarianceOptions& options) {
  return estimate_variance_mean_po(exp, 0, retained, options.same_sign) +
         estimate_variance_mean_po(exp, 1, retained, options.same_sign) -
         2.0 * estimate_covariance_lb(exp, retained, options.cov_diagonal);
}

namespace {

// Shared body of the stochastic variance bounds. q is h(W) (or h' - h at W)
// per retained unit; lambda_weight[m'] gives the per-vector mass that enters
// lambda (h, or |h' - h|); local_term adds the per-unit correction.
struct StochasticParts {
  std::vector<double> q;                        // signed weight numerator at W
  std::vector<std::vector<double>> lam_weight;  // per retained unit, per local vector
};

double stochastic_bound(const ObservedExperiment& exp, std::span<const Index> retained,
                        const StochasticParts& parts, bool include_lambda,
                        const std::vector<double>& local_extra) {
  const double factor = scale(retained);
  const auto& g = exp.graph();
  const auto& d = exp.design();
  const auto& y = exp.y();
  CompensatedSum total;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    const double p = exp.propensity_d(m);
    const double r = parts.q[i] / p * y[m];
    total.add((1.0 - p) * r * r + local_extra[i]);
  }
  PairScope pairs(g, d, retained);
  std::vector<std::size_t> position(static_cast<std::size_t>(g.n_outcome()), 0);
  for (std::size_t i = 0; i < retained.size(); ++i) position[retained[i]] = i;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    const auto set_m = g.intervention_set(m);
    const Assignment w_m = local_values(g, m, exp.mask(m));
    pairs.each(m, [&](Index mp) {
      const std::size_t j = position[mp];
      if (independent_pair(g, d, m, mp)) return;
      const auto set_mp = g.intervention_set(mp);
      if (parts.q[i] != 0 && parts.q[j] != 0) {
        const Assignment w_mp = local_values(g, mp, exp.mask(mp));
        const Rational joint = d.joint_prob(set_m, w_m, set_mp, w_mp);
        const Rational prod = exp.propensity(m) * exp.propensity(mp);
        const double ratio = to_double(joint / prod - 1);
        total.add(parts.q[i] * parts.q[j] / to_double(joint) * ratio * y[m] * y[mp]);
      }
      if (include_lambda && parts.q[i] != 0) {
        // lambda_{m,m'}(W_m): mass of m' vectors that cannot co-occur with W_m.
        // It enters once from (m, m') and once from (m', m), each with 1/2.
        double lambda = 0.0;
        const auto& weights = parts.lam_weight[j];
        for (LocalMask v = 0; v < weights.size(); ++v) {
          if (weights[v] == 0.0) continue;
          if (!d.joint_possible(set_m, w_m, set_mp, local_values(g, mp, v))) lambda += weights[v];
        }
        total.add(std::abs(parts.q[i]) / exp.propensity_d(m) * lambda * y[m] * y[m]);
      }
    });
  }
  return factor * total.value();
}

}  // namespace

double estimate_variance_stochastic(const ObservedExperiment& exp, const LocalPolicy& h,
                                    std::span<const Index> retained, const VarianceOptions& options) {
  StochasticParts parts;
  std::vector<double> extra(retained.size(), 0.0);
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    const auto table = h.table(m, options.cap);
    std::vector<double> weights(table.size());
    for (std::size_t w = 0; w < table.size(); ++w) weights[w] = to_double(table[w]);
    const double hw = weights[exp.mask(m)];
    parts.q.push_back(hw);
    parts.lam_weight.push_back(std::move(weights));
    if (!options.same_sign) {
      const double y = exp.y()[m];
      extra[i] = hw / exp.propensity_d(m) * (1.0 - hw) * y * y;
    }
  }
  return stochastic_bound(exp, retained, parts, !options.same_sign, extra);
}

double estimate_variance_stochastic_contrast(const ObservedExperiment& exp, const LocalPolicy& h,
                                             const LocalPolicy& h_prime, std::span<const Index> retained,
                                             const VarianceOptions& options) {
  StochasticParts parts;
  std::vector<double> extra(retained.size(), 0.0);
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const Index m = retained[i];
    const auto base = h.table(m, options.cap);
    const auto alt = h_prime.table(m, options.cap);
    std::vector<double> abs_delta(base.size());
    double mass = 0.0;
    for (std::size_t w = 0; w < base.size(); ++w) {
      abs_delta[w] = std::abs(to_double(alt[w] - base[w]));
      mass += abs_delta[w];
    }
    const LocalMask observed = exp.mask(m);
    parts.q.push_back(to_double(alt[observed] - base[observed]));
    const double y = exp.y()[m];
    extra[i] = y * y * abs_delta[observed] / exp.propensity_d(m) * (mass - abs_delta[observed]);
    parts.lam_weight.push_back(std::move(abs_delta));
  }
  return stochastic_bound(exp, retained, parts, true, extra);
}

std::optional<double> estimate_variance(const ObservedExperiment& exp, const EstimandSpec& spec,
                                        std::span<const Index> retained, const VarianceOptions& options) {
  switch (spec.kind) {
    case EstimandKind::mean_po:
      return estimate_variance_mean_po(exp, spec.arm, retained, options.same_sign);
    case EstimandKind::all_or_none: return estimate_variance_aon(exp, retained, options);
    case EstimandKind::status_quo_vs_none:
      return estimate_variance_mean_po(exp, 0, retained, options.same_sign);
    case EstimandKind::all_vs_status_quo:
      return estimate_variance_mean_po(exp, 1, retained, options.same_sign);
    case EstimandKind::stochastic:
    case EstimandKind::stochastic_vs_observed:
      return estimate_variance_stochastic(exp, *spec.h, retained, options);
    case EstimandKind::stochastic_contrast:
      return estimate_variance_stochastic_contrast(exp, *spec.h, *spec.h_prime, retained, options);
    case EstimandKind::plus_k: return std::nullopt;
  }
  return std::nullopt;
}

EstimateReport estimate(const ObservedExperiment& exp, const EstimandSpec& spec,
                        std::span<const Index> retained, Index n_excluded,
                        const VarianceOptions& options) {
  EstimateReport report;
  report.estimand_id = spec.id();
  report.point_estimate = point_estimate(exp, spec, retained);
  report.variance_bound = estimate_variance(exp, spec, retained, options);
  report.n_retained = static_cast<Index>(retained.size());
  report.n_excluded = n_excluded;
  report.effective_units = effective_units(exp, spec, retained);
  return report;
}

namespace {

void overlap_stats(const BipartiteGraph& g, std::span<const Index> retained, ConsistencyStats& s) {
  s.n_units = static_cast<Index>(retained.size());
  for (Index m : retained) {
    s.d_o = std::max(s.d_o, static_cast<Index>(g.intervention_set_size(m)));
    for (Index mp : retained) {
      if (m == mp) continue;
      s.d_kappa = std::max(
          s.d_kappa, static_cast<Index>(intersection_size(g.intervention_set(m), g.intervention_set(mp))));
    }
  }
}

}  // namespace

ConsistencyStats consistency_statistics(const BipartiteGraph& g, const Design& d, int a,
                                        std::span<const Index> retained) {
  ConsistencyStats s;
  overlap_stats(g, retained, s);
  std::vector<Rational> pi;
  for (Index m : retained) {
    pi.push_back(arm_prob(g, d, m, a));
    require_positive(pi.back(), m, "pi_N(a)");
    const double p = to_double(pi.back());
    s.gamma = s.gamma ? std::min(*s.gamma, p) : p;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    for (std::size_t j = 0; j < retained.size(); ++j) {
      if (i == j || independent_pair(g, d, retained[i], retained[j])) continue;
      const Rational pu = union_arm_prob(g, d, retained[i], retained[j], a);
      const Rational prod = pi[i] * pi[j];
      if (pu == prod) continue;
      ++s.kappa;
      worst = std::max(worst, std::abs(to_double(pu / prod - 1)));
    }
  }
  s.gamma_star = worst;
  return s;
}

ConsistencyStats consistency_statistics(const BipartiteGraph& g, const Design& d, const LocalPolicy& h,
                                        std::span<const Index> retained, std::size_t cap) {
  ConsistencyStats s;
  overlap_stats(g, retained, s);
  std::vector<std::vector<Rational>> pi;
  std::vector<std::vector<Rational>> ht;
  double delta = 0.0;
  for (Index m : retained) {
    pi.push_back(d.local_distribution(g.intervention_set(m), cap));
    ht.push_back(h.table(m, cap));
    Rational expected = 0;
    for (std::size_t w = 0; w < pi.back().size(); ++w) {
      if (ht.back()[w] == 0) continue;
      require_positive(pi.back()[w], m, "pi_N(w) with h(w) > 0");
      expected += ht.back()[w] * ht.back()[w] / pi.back()[w];
    }
    delta = std::max(delta, to_double(expected));
  }
  s.Delta = delta;
  double worst = 0.0;
  for (std::size_t i = 0; i < retained.size(); ++i) {
    for (std::size_t j = 0; j < retained.size(); ++j) {
      if (i == j || independent_pair(g, d, retained[i], retained[j])) continue;
      const auto joint = pair_table(d, g.intervention_set(retained[i]), g.intervention_set(retained[j]), cap);
      const std::size_t cols = pi[j].size();
      bool correlated = false;
      Rational expected = 0;
      for (std::size_t w = 0; w < pi[i].size(); ++w) {
        for (std::size_t v = 0; v < cols; ++v) {
          const Rational& pj = joint[w * cols + v];
          const Rational prod = pi[i][w] * pi[j][v];
          if (pj != prod) correlated = true;
          if (pj == 0 || ht[i][w] == 0 || ht[j][v] == 0) continue;
          expected += pj * abs(pj / prod - 1) * ht[i][w] * ht[j][v] / prod;
        }
      }
      if (!correlated) continue;
      ++s.kappa;
      worst = std::max(worst, to_double(expected));
    }
  }
  s.Gamma_star = worst;
  return s;
}

}  // namespace bipartite
