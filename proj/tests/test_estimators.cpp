#include "doctest.h"

#include <cmath>
#include <random>

#include "bipartite/estimators.hpp"
#include "bipartite/oracle.hpp"
#include "support.hpp"

using namespace bipartite;

namespace {

Rational q(long a, long b) {
  Rational r(a, b);
  r.canonicalize();
  return r;
}

std::vector<Index> all_units(Index m) {
  std::vector<Index> out(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) out[i] = i;
  return out;
}

Assignment local_of(const BipartiteGraph& g, Index m, const Assignment& w) {
  Assignment a;
  for (Index n : g.intervention_set(m)) a.push_back(w[n]);
  return a;
}

// IPW for a constant arm straight from the definition.
double brute_ipw(const BipartiteGraph& g, const fixtures::BruteDesign& b, const Assignment& w,
                 const Vector& y, int a, const std::vector<Index>& retained) {
  double total = 0;
  for (Index m : retained) {
    const auto loc = local_of(g, m, w);
    if (std::any_of(loc.begin(), loc.end(), [&](auto v) { return v != a; })) continue;
    const auto set = g.intervention_set(m);
    const double pi = to_double(fixtures::brute_marginal(b, w.size(), {set.begin(), set.end()}, loc));
    total += y[m] / pi;
  }
  return total / static_cast<double>(retained.size());
}

}  // namespace

TEST_CASE("two by two worked example") {
  const auto g = fixtures::identity(2);
  const auto d = Design::bernoulli(2, q(1, 2));
  Vector y(2);
  y << 4, 6;
  const ObservedExperiment exp(g, d, {1, 0}, y);
  const auto r = all_units(2);
  CHECK(estimate_mean_po(exp, 1, r) == doctest::Approx(4));
  CHECK(estimate_mean_po(exp, 0, r) == doctest::Approx(6));
  CHECK(point_estimate(exp, EstimandSpec::all_or_none(), r) == doctest::Approx(-2));
  CHECK(point_estimate(exp, EstimandSpec::status_quo_vs_none(), r) == doctest::Approx(5 - 6));
  CHECK(point_estimate(exp, EstimandSpec::all_vs_status_quo(), r) == doctest::Approx(4 - 5));
  CHECK(effective_units(exp, EstimandSpec::mean_po(1), r) == 1);
  CHECK(effective_units(exp, EstimandSpec::all_or_none(), r) == 2);
}

TEST_CASE("observed experiment validation") {
  const auto g = fixtures::identity(2);
  const auto d = Design::crd(2, 1);
  Vector y(2);
  y << 1, 2;
  CHECK_THROWS_AS(ObservedExperiment(g, d, {1, 1}, y), InputError);
  CHECK_THROWS_AS(ObservedExperiment(g, d, {1}, y), InputError);
  CHECK_THROWS_AS(ObservedExperiment(g, d, {1, 2}, y), InputError);
  Vector bad(2);
  bad << 1, std::nan("");
  CHECK_THROWS_AS(ObservedExperiment(g, d, {1, 0}, bad), InputError);
  const ObservedExperiment ok(g, d, {1, 0}, y);
  CHECK_THROWS_AS(estimate_mean_po(ok, 1, {}), EmptyRetainedSet);
}

TEST_CASE("point-mass design reduces the treated mean to the observed mean") {
  const auto g = fixtures::three_lines();
  const auto d = Design::point_mass({1, 1, 1});
  Vector y = Vector::LinSpaced(8, -3, 4);
  const ObservedExperiment exp(g, d, {1, 1, 1}, y);
  CHECK(point_estimate(exp, EstimandSpec::all_vs_status_quo(), all_units(8)) == doctest::Approx(0));
}

TEST_CASE("positivity screening") {
  const auto g = fixtures::three_lines();
  const auto report = screen_positivity(g, Design::crd(3, 2), EstimandSpec::all_or_none());
  CHECK(report.retained == std::vector<Index>{0, 1, 2, 4, 7});
  REQUIRE(report.excluded.size() == 3);
  CHECK(report.excluded[0].unit == 3);
  CHECK(report.excluded[1].unit == 5);
  CHECK(report.excluded[2].unit == 6);
  CHECK(report.excluded[0].condition == "pi_N(0)=0");

  const auto none = screen_positivity(g, Design::bernoulli(3, q(1, 2)), EstimandSpec::all_or_none());
  CHECK(none.excluded.empty());

  // Unit 1 always treated: every outcome it reaches loses the control arm.
  const auto sure = Design::stratified_bernoulli({0, 1, 1}, {q(1, 1), q(1, 2)});
  const auto r1 = screen_positivity(g, sure, EstimandSpec::all_or_none());
  CHECK(r1.retained == std::vector<Index>{4, 5, 6, 7});
  CHECK(screen_positivity(g, sure, EstimandSpec::all_vs_status_quo()).excluded.empty());

  const auto h = std::make_shared<LocalPolicy>(LocalPolicy::bernoulli(g, q(1, 2)));
  const auto rs = screen_positivity(g, Design::crd(3, 1), EstimandSpec::stochastic(h));
  CHECK(rs.retained == std::vector<Index>{0, 1, 2, 4, 7});
  CHECK(rs.excluded.front().condition == "pi_N(w)=0 where h(w)>0");

  const auto rs1 = screen_positivity(g, Design::crd(3, 1), EstimandSpec::mean_po(0));
  std::vector<PositivityReport> both{rs, rs1, r1};
  CHECK(common_retained(both) == std::vector<Index>{4, 7});
}

TEST_CASE("plus-K preconditions and screening") {
  const auto g = fixtures::three_lines();
  CHECK_THROWS_AS(screen_positivity(g, Design::bernoulli(3, q(1, 2)), EstimandSpec::plus_k(1)),
                  PreconditionError);
  CHECK_THROWS_AS(screen_positivity(g, Design::crd(3, 3), EstimandSpec::plus_k(1)), PreconditionError);
  CHECK_THROWS_AS(screen_positivity(g, Design::crd(3, 1), EstimandSpec::plus_k(3)), InputError);
  // With one treated, two-unit sets reach (1,1) after a flip but never by design.
  const auto r = screen_positivity(g, Design::crd(3, 1), EstimandSpec::plus_k(1));
  CHECK(r.retained == std::vector<Index>{0, 1, 2, 4, 7});
  CHECK(r.excluded.front().condition == "richer-vector condition fails");
  CHECK(screen_positivity(g, Design::crd(3, 2), EstimandSpec::plus_k(1)).excluded.empty());
}

TEST_CASE("rho weight worked examples") {
  // Units 1 and 2 of a three-unit CRD feed outcome units 1 and 2.
  const BipartiteGraph g(3, 3, {{0, 0}, {1, 1}});
  const auto d = Design::crd(3, 1);
  const ObservedExperiment exp(g, d, {1, 0, 0}, Vector::Ones(3));
  CHECK(rho_weight_exact(exp, 0, 1) == 2);
  CHECK(rho_weight_exact(exp, 1, 1) == q(1, 2));
  CHECK(rho_weight_exact(exp, 2, 1) == 1);
}

TEST_CASE("rho weight equals the ratio of flipped to design probability") {
  // Brute force: P(local vector of W + S) with S a uniform K-subset of the
  // controls, divided by P(local vector of W).
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = 6;
    const auto g = fixtures::random_graph(n, 5, 4, rng);
    std::uniform_int_distribution<Index> t(1, n - 1);
    const auto d = Design::crd(n, t(rng));
    const Index controls = n - *d.fixed_treated_count();
    std::uniform_int_distribution<Index> kd(1, controls);
    const Index k = kd(rng);
    const auto w = d.sample(rng);
    const ObservedExperiment exp(g, d, w, Vector::Zero(5));
    for (Index m = 0; m < g.n_outcome(); ++m) {
      const auto target = local_of(g, m, w);
      Rational hit = 0;
      for (const auto& [v, p] : d.enumerate()) {
        std::vector<Index> ctrl;
        for (Index i = 0; i < n; ++i) {
          if (v[i] == 0) ctrl.push_back(i);
        }
        std::vector<bool> pick(ctrl.size(), false);
        std::fill(pick.begin(), pick.begin() + k, true);
        Integer ways = 0, match = 0;
        do {
          auto flipped = v;
          for (std::size_t i = 0; i < ctrl.size(); ++i) {
            if (pick[i]) flipped[ctrl[i]] = 1;
          }
          ways += 1;
          if (local_of(g, m, flipped) == target) match += 1;
        } while (std::prev_permutation(pick.begin(), pick.end()));
        hit += p * Rational(match) / Rational(ways);
      }
      const auto set = g.intervention_set(m);
      CHECK(rho_weight_exact(exp, m, k) == hit / d.marginal_prob(set, target));
    }
  }
}

TEST_CASE("IPW matches the definition and is unbiased under every design kind") {
  std::mt19937_64 rng(99);
  int fixtures_checked = 0;
  for (int rep = 0; rep < 6; ++rep) {
    const Index n = 5, M = 6;
    const auto g = fixtures::random_graph(n, M, 3, rng, rep % 2 == 1);
    const auto po = make_outcome_table(g, static_cast<OutcomeFamily>(rep % 4), 1000 + rep);
    for (const auto& c : fixtures::all_design_kinds(n, rng)) {
      CAPTURE(c.name);
      for (int a : {0, 1}) {
        const auto spec = EstimandSpec::mean_po(a);
        const auto retained = screen_positivity(g, c.design, spec).retained;
        if (retained.empty()) continue;
        double expectation = 0;
        for (std::uint64_t mask = 0; mask < 32; ++mask) {
          const auto w = fixtures::bits_of(mask, 5);
          const auto p = c.brute.prob(w);
          if (p == 0) continue;
          const auto y = po.observe(g, w);
          const ObservedExperiment exp(g, c.design, w, y);
          const double est = estimate_mean_po(exp, a, retained);
          CHECK(est == doctest::Approx(brute_ipw(g, c.brute, w, y, a, retained)).epsilon(1e-12));
          expectation += to_double(p) * est;
        }
        double truth = 0;
        for (Index m : retained) truth += po.value(m, a ? full_mask(g.intervention_set_size(m)) : 0);
        truth /= static_cast<double>(retained.size());
        CHECK(std::abs(expectation - truth) <= 1e-10 * std::max(1.0, std::abs(truth)));
        ++fixtures_checked;
      }
    }
  }
  CHECK(fixtures_checked >= 20);
}

TEST_CASE("stochastic estimator reductions") {
  std::mt19937_64 rng(4);
  const auto g = fixtures::random_graph(5, 6, 3, rng);
  const auto d = Design::crd(5, 2);
  const auto r = all_units(6);
  const auto implied = LocalPolicy::implied(g, d);
  const auto ones = LocalPolicy::constant_arm(g, 1);
  const auto bern = LocalPolicy::bernoulli(g, q(1, 3));
  for (const auto& [w, p] : d.enumerate()) {
    Vector y = Vector::Random(6);
    const ObservedExperiment exp(g, d, w, y);
    CHECK(estimate_stochastic(exp, implied, r) == doctest::Approx(observed_mean(exp, r)).epsilon(1e-12));
    CHECK(estimate_stochastic(exp, ones, r) == doctest::Approx(estimate_mean_po(exp, 1, r)).epsilon(1e-12));
    CHECK(estimate_stochastic_contrast(exp, bern, bern, r) == 0);
  }
}

TEST_CASE("oracle plus-K mean agrees with explicit subset enumeration") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = fixtures::random_graph(6, 7, 3, rng, true);
    const auto po = make_outcome_table(g, OutcomeFamily::interaction, 50 + rep);
    const auto d = Design::crd(6, 2);
    const auto w = d.sample(rng);
    for (Index k = 1; k <= 4; ++k) {
      const auto r = all_units(7);
      const double direct = plus_k_mean_bruteforce(g, po, k, r, w);
      const double formula = estimand_value(g, d, po, EstimandSpec::plus_k(k), r, w) +
                             observed_mean(ObservedExperiment(g, d, w, po.observe(g, w)), r);
      CHECK(formula == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("all controls flipped gives the treated mean") {
  const auto g = fixtures::three_lines();
  const auto po = make_outcome_table(g, OutcomeFamily::additive, 8);
  const auto d = Design::crd(3, 1);
  const auto r = all_units(8);
  for (const auto& [w, p] : d.enumerate()) {
    double treated = 0;
    for (Index m = 0; m < 8; ++m) treated += po.value(m, full_mask(g.intervention_set_size(m)));
    CHECK(plus_k_mean_bruteforce(g, po, 2, r, w) == doctest::Approx(treated / 8));
  }
}

TEST_CASE("units untouched by controls get weight one") {
  // Outcomes read only unit 1, which is treated in the realized vector.
  const BipartiteGraph g(3, 2, {{0, 0}, {0, 1}});
  const auto d = Design::point_mass({1, 0, 0});
  Vector y(2);
  y << 3, -1;
  const ObservedExperiment exp(g, d, {1, 0, 0}, y);
  CHECK(rho_weight_exact(exp, 0, 1) == 1);
  CHECK(point_estimate(exp, EstimandSpec::plus_k(2), all_units(2)) == doctest::Approx(0));
}
