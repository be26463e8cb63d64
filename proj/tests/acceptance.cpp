// Acceptance checks. Prints one PASS or FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bipartite/io.hpp"
#include "bipartite/oracle.hpp"
#include "bipartite/sim.hpp"
#include "support.hpp"

using namespace bipartite;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s criterion %d: %s; %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

unsigned hw_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Seeded small fixtures covering every design kind and the nonlinear
// outcome families.
struct Fixture {
  std::string name;
  BipartiteGraph graph;
  Design design;
  PotentialOutcomeTable po;
};

std::vector<Fixture> make_fixtures() {
  std::vector<Fixture> out;
  for (int i = 0; i < 24; ++i) {
    std::mt19937_64 rng(1000 + i);
    const Index n = 3 + i % 6;
    const Index m = 4 + (i * 5) % 9;
    auto g = fixtures::random_graph(n, m, 3, rng, i % 4 == 0);
    auto cases = fixtures::all_design_kinds(n, rng);
    auto& dc = cases[static_cast<std::size_t>(i % 6)];
    const auto family = i % 2 ? OutcomeFamily::saturating : OutcomeFamily::interaction;
    auto po = make_outcome_table(g, family, 77 + i);
    out.push_back({dc.name + "/" + to_string(family) + "/N" + std::to_string(n) + "M" + std::to_string(m),
                   std::move(g), std::move(dc.design), std::move(po)});
  }
  return out;
}

std::vector<std::string> estimand_texts(const Design& d) {
  std::vector<std::string> e{"mean0",
                             "mean1",
                             "aon",
                             "sq1",
                             "sq0",
                             "stoch:bernoulli(1/3)",
                             "stoch:key(1,1/2)",
                             "contrast:bernoulli(1/3),bernoulli(2/3)",
                             "stoch_sq:bernoulli(1/2)"};
  if (d.kind() != DesignKind::point_mass && d.kind() != DesignKind::tabulated) e.push_back("stoch_sq:shift(1)");
  if (const auto t = d.fixed_treated_count()) {
    for (Index k = 1; k <= 2; ++k) {
      if (d.n_units() - *t >= k) e.push_back("plus_" + std::to_string(k));
    }
  }
  return e;
}

struct Screened {
  EstimandSpec spec;
  std::vector<Index> retained;
};

std::vector<Screened> screened_estimands(const Fixture& f) {
  std::vector<Screened> out;
  for (const auto& text : estimand_texts(f.design)) {
    auto spec = io::parse_estimand(text, f.graph, f.design);
    auto rep = screen_positivity(f.graph, f.design, spec);
    if (!rep.retained.empty()) out.push_back({std::move(spec), std::move(rep.retained)});
  }
  return out;
}

Outcome unbiasedness(const std::vector<Fixture>& fx) {
  double worst = 0.0;
  std::string worst_at;
  int checks = 0;
  std::vector<std::string> kinds;
  for (const auto& f : fx) {
    kinds.push_back(to_string(f.design.kind()));
    for (const auto& s : screened_estimands(f)) {
      const double bias = std::abs(exact_bias(f.graph, f.design, f.po, s.spec, s.retained));
      ++checks;
      if (bias > worst) {
        worst = bias;
        worst_at = f.name + " " + s.spec.id();
      }
    }
  }
  std::sort(kinds.begin(), kinds.end());
  const auto n_kinds = std::unique(kinds.begin(), kinds.end()) - kinds.begin();
  const bool ok = worst <= 1e-10 && fx.size() >= 20 && n_kinds == 6;
  return {ok, std::to_string(fx.size()) + " fixtures, " + std::to_string(n_kinds) + " design kinds, " +
                  std::to_string(checks) + " estimator checks, max |E[est - target]| = " + sci(worst) +
                  (ok ? "" : " at " + worst_at)};
}

Outcome variance_equalities(const std::vector<Fixture>& fx) {
  double worst = 0.0;
  std::string worst_at;
  int checks = 0;
  const auto record = [&](double closed, double enumerated, const std::string& at) {
    ++checks;
    const double diff = std::abs(closed - enumerated);
    if (diff > worst) {
      worst = diff;
      worst_at = at;
    }
  };
  for (const auto& f : fx) {
    for (const auto& s : screened_estimands(f)) {
      const auto& r = s.retained;
      const auto at = f.name + " " + s.spec.id();
      switch (s.spec.kind) {
        case EstimandKind::mean_po:
          record(true_variance_mean_po(f.graph, f.design, f.po, s.spec.arm, r),
                 exact_variance(f.graph, f.design, f.po, s.spec, r), at);
          break;
        case EstimandKind::all_or_none: {
          record(true_variance_aon(f.graph, f.design, f.po, r), exact_variance(f.graph, f.design, f.po, s.spec, r),
                 at);
          const auto y0 = EstimandSpec::mean_po(0);
          const auto y1 = EstimandSpec::mean_po(1);
          const auto e = [&](const EstimandSpec& sp) { return exact_expectation(f.graph, f.design, f.po, sp, r); };
          const double mean0 = e(y0), mean1 = e(y1);
          const double cov = exact_expectation_of(f.design, [&](const Assignment& w) {
            return (estimator_at(f.graph, f.design, f.po, y0, r, w) - mean0) *
                   (estimator_at(f.graph, f.design, f.po, y1, r, w) - mean1);
          });
          record(true_covariance_aon(f.graph, f.design, f.po, r), cov, at + " covariance");
          break;
        }
        case EstimandKind::stochastic:
          record(true_variance_stochastic(f.graph, f.design, f.po, *s.spec.h, r),
                 exact_variance(f.graph, f.design, f.po, s.spec, r), at);
          break;
        case EstimandKind::stochastic_contrast:
          record(true_variance_stochastic_contrast(f.graph, f.design, f.po, *s.spec.h, *s.spec.h_prime, r),
                 exact_variance(f.graph, f.design, f.po, s.spec, r), at);
          break;
        case EstimandKind::stochastic_vs_observed:
          record(true_variance_stochastic(f.graph, f.design, f.po, *s.spec.h, r),
                 exact_error_variance(f.graph, f.design, f.po, s.spec, r), at);
          break;
        default: break;
      }
    }
  }
  const bool ok = worst <= 1e-10;
  return {ok, std::to_string(checks) + " closed-form vs enumeration checks, max |diff| = " + sci(worst) +
                  (ok ? "" : " at " + worst_at)};
}

PotentialOutcomeTable shifted_positive(const BipartiteGraph& g, const PotentialOutcomeTable& po) {
  double lo = 0.0;
  for (Index m = 0; m < po.n_outcome(); ++m) {
    for (double v : po.unit(m)) lo = std::min(lo, v);
  }
  std::vector<std::vector<double>> values;
  for (Index m = 0; m < po.n_outcome(); ++m) {
    values.emplace_back();
    for (double v : po.unit(m)) values.back().push_back(v - lo + 0.5);
  }
  return PotentialOutcomeTable(g, std::move(values));
}

Outcome conservative_bounds(const std::vector<Fixture>& fx) {
  double worst_slack = 0.0;  // most negative E[bound] - V
  std::string worst_at;
  double worst_equality = 0.0;
  int checks = 0, equalities = 0;
  for (const auto& f : fx) {
    const auto positive = shifted_positive(f.graph, f.po);
    for (const bool same_sign : {false, true}) {
      const auto& po = same_sign ? positive : f.po;
      VarianceOptions opt;
      opt.same_sign = same_sign;
      for (const auto& s : screened_estimands(f)) {
        if (s.spec.kind == EstimandKind::plus_k) continue;
        const double v = exact_error_variance(f.graph, f.design, po, s.spec, s.retained);
        const double eb = exact_expected_variance_bound(f.graph, f.design, po, s.spec, s.retained, opt);
        ++checks;
        if (eb - v < worst_slack) {
          worst_slack = eb - v;
          worst_at = f.name + " " + s.spec.id() + (same_sign ? " same_sign" : "");
        }
        // Full joint positivity: Bernoulli designs with p strictly inside (0, 1).
        if (!same_sign && s.spec.kind == EstimandKind::mean_po && f.design.is_bernoulli_type()) {
          const auto ps = f.design.stratum_probabilities();
          if (std::all_of(ps.begin(), ps.end(), [](const Rational& p) { return p > 0 && p < 1; })) {
            ++equalities;
            worst_equality = std::max(worst_equality, std::abs(eb - v));
          }
        }
      }
    }
  }
  const bool ok = worst_slack >= -1e-10 && worst_equality <= 1e-10 && equalities > 0;
  return {ok, std::to_string(checks) + " bound checks, min E[bound] - V = " + sci(worst_slack) + ", " +
                  std::to_string(equalities) + " equality checks, max |E[bound] - V| = " + sci(worst_equality) +
                  (ok ? "" : " at " + worst_at)};
}

Outcome rho_closed_form() {
  std::mt19937_64 rng(4242);
  int triples = 0, mismatches = 0;
  while (triples < 10000) {
    const Index n = std::uniform_int_distribution<Index>(2, 12)(rng);
    const Index m = std::uniform_int_distribution<Index>(1, 10)(rng);
    const Index t = std::uniform_int_distribution<Index>(0, n - 1)(rng);
    const auto g = fixtures::random_graph(n, m, 4, rng, true);
    const auto d = Design::crd(n, t);
    for (int draw = 0; draw < 10; ++draw) {
      const auto w = d.sample(rng);
      const ObservedExperiment exp(g, d, w, Vector::Zero(m));
      const Index nc = n - t;
      for (Index u = 0; u < m; ++u) {
        Index nt_m = 0;
        for (Index i : g.intervention_set(u)) nt_m += w[i];
        const Index nc_m = static_cast<Index>(g.intervention_set_size(u)) - nt_m;
        // CRD with K = 1.
        Rational closed = Rational(nc - nc_m) + Rational(nt_m * (nc - nc_m), t - nt_m + 1);
        closed /= nc;
        closed.canonicalize();
        if (rho_weight_exact(exp, u, 1) != closed) ++mismatches;
        ++triples;
      }
    }
  }
  return {mismatches == 0, std::to_string(triples) + " (fixture, W, m) triples, " + std::to_string(mismatches) +
                               " rational mismatches"};
}

Outcome level_test() {
  std::vector<std::string> cells;
  bool ok = true;
  for (const char* design : {"kind=bernoulli,p=1/2", "kind=crd,n_treated=12"}) {
    auto spec = sim::parse_study_spec(io::Json::parse(R"json({
      "graph": {"family": "general", "n_intervention": 24, "n_outcome": 48, "max_set": 3, "seed": 17},
      "design": "kind=crd,n_treated=12",
      "outcomes": {"family": "constant", "seed": 23},
      "randtest": {"draws": 500, "alpha": 0.05},
      "replications": 1000, "seed": 2024
    })json"));
    spec.design = io::parse_inline_config(design);
    spec.threads = hw_threads();
    const auto report = sim::run_study(spec);
    for (const auto& t : report.tests) {
      const double rate = t.rejection_rate.value;
      const bool cell_ok = rate >= 0.03 && rate <= 0.07 && t.n_tests >= 990;
      ok = ok && cell_ok;
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s %s %.3f (n=%lld)", spec.design.get("kind").c_str(), t.id.c_str(), rate,
                    static_cast<long long>(t.n_tests));
      cells.push_back(buf);
    }
  }
  std::string detail = "rejection at 0.05, 1000 experiments x R=500:";
  for (const auto& c : cells) detail += " [" + c + "]";
  return {ok && cells.size() == 6, detail};
}

Outcome trend() {
  auto spec = sim::parse_study_spec(io::Json::parse(R"json({
    "graph": {"family": "single_parent", "max_set": 3, "seed": 8},
    "design": "kind=bernoulli,p=1/2",
    "outcomes": {"family": "additive", "seed": 31},
    "estimands": ["mean1"],
    "replications": 2000, "seed": 99, "exact_variance": false,
    "trend": {"n_outcome": [50, 200, 800]}
  })json"));
  spec.threads = hw_threads();
  const auto t = sim::run_trend(spec);
  std::string detail;
  bool strict = true;
  for (std::size_t i = 0; i < t.studies.size(); ++i) {
    const auto& s = t.studies[i];
    const auto& c = *s.consistency;
    char buf[200];
    std::snprintf(buf, sizeof buf, "M=%lld MSE=%.4g (SE %.2g) gamma=%.3g kappa=%lld d_o=%lld; ",
                  static_cast<long long>(s.n_outcome), s.estimands[0].mse.value, s.estimands[0].mse.se,
                  c.gamma.value_or(NAN), static_cast<long long>(c.kappa), static_cast<long long>(c.d_o));
    detail += buf;
    if (i > 0 && !(s.estimands[0].mse.value < t.studies[i - 1].estimands[0].mse.value)) strict = false;
  }
  detail += std::string("regime d_o < ln M ") + (t.regime_ok ? "holds" : "violated");
  return {t.mse_decreasing && t.regime_ok && strict, detail};
}

Outcome positivity_fidelity() {
  const auto g = fixtures::three_lines();
  const auto rep = screen_positivity(g, Design::crd(3, 2), EstimandSpec::all_or_none());
  std::vector<Index> excluded;
  for (const auto& v : rep.excluded) excluded.push_back(v.unit + 1);
  bool ok = excluded == std::vector<Index>{4, 6, 7};
  std::string detail = "three-line graph crd(3,2) aon excludes {";
  for (std::size_t i = 0; i < excluded.size(); ++i) detail += (i ? "," : "") + std::to_string(excluded[i]);
  detail += "}";

  // One unit forced treated: exactly its outcome set is excluded.
  int graphs = 0;
  std::mt19937_64 rng(7);
  std::vector<BipartiteGraph> cases{g};
  for (int i = 0; i < 30; ++i) cases.push_back(fixtures::random_graph(6, 10, 3, rng, true));
  for (const auto& gr : cases) {
    for (Index forced = 0; forced < gr.n_intervention(); ++forced) {
      std::vector<Index> strata(static_cast<std::size_t>(gr.n_intervention()), 0);
      strata[forced] = 1;
      const auto d = Design::stratified_bernoulli(strata, {Rational(1, 2), Rational(1)});
      for (const auto& spec : {EstimandSpec::all_or_none(), EstimandSpec::mean_po(0)}) {
        const auto r = screen_positivity(gr, d, spec);
        std::vector<Index> got;
        for (const auto& v : r.excluded) got.push_back(v.unit);
        const auto want = gr.outcome_set(forced);
        ok = ok && std::equal(got.begin(), got.end(), want.begin(), want.end());
      }
      ++graphs;
    }
  }
  return {ok, detail + "; p=1 unit excludes exactly its outcome set in " + std::to_string(graphs) + " cases"};
}

Outcome design_fidelity() {
  const std::vector<int> links{1, 2, 3, 4, 5, 6, 7, 8, 9, 18};
  const std::vector<Index> treated{25, 23, 9, 5, 7, 6, 2, 1, 4, 1};
  const std::vector<Index> control{27, 14, 12, 7, 1, 3, 1, 1, 1, 0};
  // Strata and design through the same file formats the CLI reads.
  const auto dir = std::filesystem::temp_directory_path() / "bipartite_acceptance";
  std::filesystem::create_directories(dir);
  {
    std::ofstream strata(dir / "strata.csv");
    strata << "intervention_id,stratum_id\n";
    Index id = 0;
    for (std::size_t s = 0; s < links.size(); ++s) {
      for (Index i = 0; i < treated[s] + control[s]; ++i) strata << ++id << ",links" << links[s] << '\n';
    }
    std::ofstream crd(dir / "crd.cfg"), bern(dir / "bern.cfg");
    crd << "kind = stratified_crd\nstrata_file = strata.csv\n";
    bern << "kind = stratified_bernoulli\nstrata_file = strata.csv\n";
    for (std::size_t s = 0; s < links.size(); ++s) {
      crd << "n_treated.links" << links[s] << " = " << treated[s] << '\n';
      bern << "p.links" << links[s] << " = " << treated[s] << '/' << treated[s] + control[s] << '\n';
    }
  }
  Index n = 0;
  for (std::size_t s = 0; s < links.size(); ++s) n += treated[s] + control[s];
  const auto crd = io::design_from_config(io::load_config(dir / "crd.cfg"), n);
  const auto bern = io::design_from_config(io::load_config(dir / "bern.cfg"), n);

  bool ok = true;
  const int draws = 5000;
  for (int r = 0; r < draws; ++r) {
    const auto w = crd.sample(derive_seed(55, r));
    std::vector<Index> count(links.size(), 0);
    for (Index i = 0; i < n; ++i) count[crd.stratum_of_unit()[i]] += w[i];
    ok = ok && count == treated;
  }
  const Index unit = 0;  // first unit of the one-link stratum
  const Assignment one{1};
  const auto p = bern.marginal_prob(std::span<const Index>(&unit, 1), one);
  ok = ok && p == Rational(25, 52);
  return {ok, std::to_string(draws) + " stratified CRD draws match the per-stratum treated counts; one-link "
                                      "Bernoulli probability = " +
                  p.get_str()};
}

Outcome dual_path() {
  std::mt19937_64 rng(909);
  int queries = 0, mismatches = 0, designs = 0;
  for (Index n : {1, 2, 4, 6, 8, 10, 12}) {
    for (auto& dc : fixtures::all_design_kinds(n, rng)) {
      ++designs;
      const std::size_t size = std::size_t{1} << n;
      std::vector<Rational> prob(size);
      for (std::size_t mask = 0; mask < size; ++mask) prob[mask] = dc.brute.prob(fixtures::bits_of(mask, n));
      // Brute force: sum the full-support probabilities matching every constraint.
      const auto brute = [&](const std::vector<Index>& s, const Assignment& a) {
        Rational total = 0;
        for (std::size_t mask = 0; mask < size; ++mask) {
          bool match = true;
          for (std::size_t i = 0; i < s.size() && match; ++i) match = ((mask >> s[i]) & 1U) == a[i];
          if (match) total += prob[mask];
        }
        return total;
      };
      std::uniform_int_distribution<Index> unit(0, n - 1);
      std::bernoulli_distribution coin(0.5);
      const auto random_subset = [&] {
        std::vector<Index> s;
        Assignment a;
        const Index k = std::uniform_int_distribution<Index>(1, std::min<Index>(n, 5))(rng);
        for (Index i = 0; i < k; ++i) {
          s.push_back(unit(rng));
          a.push_back(coin(rng));
        }
        return std::pair{s, a};
      };
      for (int q = 0; q < 40; ++q) {
        const auto [s1, a1] = random_subset();
        const auto [s2, a2] = random_subset();
        ++queries;
        if (dc.design.marginal_prob(s1, a1) != brute(s1, a1)) ++mismatches;
        auto s = s1;
        auto a = a1;
        s.insert(s.end(), s2.begin(), s2.end());
        a.insert(a.end(), a2.begin(), a2.end());
        ++queries;
        if (dc.design.joint_prob(s1, a1, s2, a2) != brute(s, a)) ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(designs) + " designs (all kinds, N <= 12), " + std::to_string(queries) +
                               " marginal/joint queries, " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main() {
  const auto fx = make_fixtures();
  criterion(1, "unbiasedness", [&] { return unbiasedness(fx); });
  criterion(2, "variance formulas equal enumeration", [&] { return variance_equalities(fx); });
  criterion(3, "conservative variance bounds", [&] { return conservative_bounds(fx); });
  criterion(4, "rho general formula equals the CRD K=1 closed form", rho_closed_form);
  criterion(5, "randomization-test level", level_test);
  criterion(6, "consistency trend", trend);
  criterion(7, "positivity screening fidelity", positivity_fidelity);
  criterion(8, "stratified design fidelity", design_fidelity);
  criterion(9, "dual-path probabilities", dual_path);
  return failures == 0 ? 0 : 1;
}
