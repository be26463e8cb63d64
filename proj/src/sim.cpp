#include "bipartite/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "bipartite/oracle.hpp"

namespace bipartite::sim {

std::string to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::one_to_one: return "one_to_one";
    case GraphFamily::single_parent: return "single_parent";
    case GraphFamily::partial: return "partial";
    case GraphFamily::general: return "general";
  }
  return "?";
}

GraphFamily parse_graph_family(const std::string& name) {
  for (auto f : {GraphFamily::one_to_one, GraphFamily::single_parent, GraphFamily::partial, GraphFamily::general}) {
    if (to_string(f) == name) return f;
  }
  throw InputError("unknown graph family '" + name + "'");
}

namespace {

using Rng = std::mt19937_64;

Index uniform(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

// k distinct units drawn uniformly from `pool`.
std::vector<Index> draw_subset(std::vector<Index> pool, Index k, Rng& rng) {
  for (Index i = 0; i < k; ++i) {
    std::swap(pool[i], pool[uniform(rng, i, static_cast<Index>(pool.size()) - 1)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

// Each of `total` items gets a group; every group gets at least one.
std::vector<Index> spread(Index total, Index groups, Rng& rng) {
  std::vector<Index> group(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) group[i] = i < groups ? i : uniform(rng, 0, groups - 1);
  std::shuffle(group.begin(), group.end(), rng);
  return group;
}

BipartiteGraph single_parent(const GraphParams& p, Rng& rng) {
  std::vector<Index> sizes = p.sizes;
  if (sizes.empty()) {
    if (p.n_outcome < 1) throw InputError("single_parent needs n_outcome or sizes");
    if (p.n_intervention > 0) {
      if (p.n_intervention > p.n_outcome) throw InputError("single_parent needs n_outcome >= n_intervention");
      sizes.assign(static_cast<std::size_t>(p.n_intervention), 0);
      for (Index g : spread(p.n_outcome, p.n_intervention, rng)) ++sizes[g];
    } else {
      if (p.max_set < 1) throw InputError("single_parent needs max_set >= 1");
      for (Index left = p.n_outcome; left > 0;) {
        sizes.push_back(std::min(left, uniform(rng, 1, p.max_set)));
        left -= sizes.back();
      }
    }
  }
  std::vector<Edge> edges;
  Index m = 0;
  for (std::size_t n = 0; n < sizes.size(); ++n) {
    if (sizes[n] < 1) throw InputError("single_parent sizes must be positive");
    for (Index i = 0; i < sizes[n]; ++i) edges.emplace_back(static_cast<Index>(n), m++);
  }
  return BipartiteGraph(static_cast<Index>(sizes.size()), m, std::move(edges));
}

BipartiteGraph partial(const GraphParams& p, Rng& rng) {
  const Index c = p.clusters;
  if (c < 2) throw InputError("partial needs at least 2 clusters");
  if (p.n_intervention < c + 1) throw InputError("partial needs n_intervention > clusters");
  if (p.n_outcome < c) throw InputError("partial needs n_outcome >= clusters");
  if (p.max_set < 2) throw InputError("partial needs max_set >= 2");
  // Unit 0 and unit 1 share cluster 0 so that one block has overlapping sets.
  auto unit_cluster = spread(p.n_intervention - 1, c, rng);
  unit_cluster.insert(unit_cluster.begin(), 0);
  std::swap(unit_cluster[1], *std::find(unit_cluster.begin() + 1, unit_cluster.end(), 0));
  const auto outcome_cluster = spread(p.n_outcome, c, rng);

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(c));
  for (Index n = 0; n < p.n_intervention; ++n) members[unit_cluster[n]].push_back(n);
  std::vector<Edge> edges;
  bool overlap_forced = false;
  for (Index m = 0; m < p.n_outcome; ++m) {
    const auto& pool = members[outcome_cluster[m]];
    const Index cap = std::min<Index>(p.max_set, static_cast<Index>(pool.size()));
    Index k = uniform(rng, 1, cap);
    if (outcome_cluster[m] == 0 && !overlap_forced) {
      k = std::max<Index>(k, 2);
      overlap_forced = true;
    }
    for (Index n : draw_subset(pool, k, rng)) edges.emplace_back(n, m);
  }
  return BipartiteGraph(p.n_intervention, p.n_outcome, std::move(edges));
}

BipartiteGraph general(const GraphParams& p, Rng& rng) {
  if (p.n_outcome < 1) throw InputError("general needs n_outcome >= 1");
  if (p.max_set < 1) throw InputError("general needs max_set >= 1");
  Index n = p.n_intervention;
  if (n == 0) {
    if (!(p.overlap_rate > 0.0 && p.overlap_rate <= 1.0)) {
      throw InputError("overlap_rate must lie in (0, 1]; more overlapping pairs than M(M-1) is infeasible");
    }
    // Two sets of mean size s overlap with probability about s^2 / N.
    const double s = (1.0 + static_cast<double>(p.max_set)) / 2.0;
    n = std::max<Index>(p.max_set, static_cast<Index>(std::ceil(s * s / p.overlap_rate)));
  }
  if (p.max_set > n) throw InputError("max_set exceeds the number of intervention units");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  std::vector<Edge> edges;
  for (Index m = 0; m < p.n_outcome; ++m) {
    for (Index u : draw_subset(pool, uniform(rng, 1, p.max_set), rng)) edges.emplace_back(u, m);
  }
  return BipartiteGraph(n, p.n_outcome, std::move(edges));
}

}  // namespace

BipartiteGraph generate_graph(GraphFamily family, const GraphParams& params, std::uint64_t seed) {
  Rng rng(seed);
  switch (family) {
    case GraphFamily::one_to_one: {
      const Index n = params.n_outcome > 0 ? params.n_outcome : params.n_intervention;
      if (n < 1) throw InputError("one_to_one needs n_outcome >= 1");
      std::vector<Edge> edges;
      for (Index i = 0; i < n; ++i) edges.emplace_back(i, i);
      return BipartiteGraph(n, n, std::move(edges));
    }
    case GraphFamily::single_parent: return single_parent(params, rng);
    case GraphFamily::partial: return partial(params, rng);
    case GraphFamily::general: return general(params, rng);
  }
  throw InputError("unknown graph family");
}

namespace {

template <class T>
T field(const io::Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void check_keys(const io::Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw InputError(where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

StudySpec parse_study_spec(const io::Json& j, const std::filesystem::path& base_dir) {
  try {
    check_keys(j,
               {"graph", "design", "outcomes", "estimands", "replications", "seed", "threads", "variance",
                "exact_variance", "same_sign", "union_exclusion", "randtest", "trend"},
               "study spec");
    StudySpec s;
    const auto& g = j.at("graph");
    check_keys(g,
               {"family", "n_intervention", "n_outcome", "sizes", "clusters", "max_set", "overlap_rate", "seed",
                "edges_file"},
               "graph");
    if (g.contains("edges_file")) {
      s.edges_file = g.at("edges_file").get<std::string>();
      if (s.edges_file.is_relative()) s.edges_file = base_dir / s.edges_file;
    } else {
      s.family = parse_graph_family(g.at("family").get<std::string>());
    }
    s.graph.n_intervention = field<Index>(g, "n_intervention", 0);
    s.graph.n_outcome = field<Index>(g, "n_outcome", 0);
    s.graph.sizes = field<std::vector<Index>>(g, "sizes", {});
    s.graph.clusters = field<Index>(g, "clusters", 2);
    s.graph.max_set = field<Index>(g, "max_set", 3);
    s.graph.overlap_rate = field<double>(g, "overlap_rate", 0.1);
    s.graph_seed = field<std::uint64_t>(g, "seed", 1);

    const auto& d = j.at("design");
    if (d.is_string()) {
      s.design = io::parse_inline_config(d.get<std::string>(), base_dir);
    } else {
      if (!d.is_object()) throw InputError("design must be a string or an object");
      s.design.source = "study design";
      s.design.base_dir = base_dir;
      for (const auto& [key, value] : d.items()) {
        s.design.values[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }

    if (j.contains("outcomes")) {
      const auto& o = j.at("outcomes");
      check_keys(o, {"family", "seed"}, "outcomes");
      s.outcome_family = parse_outcome_family(field<std::string>(o, "family", "additive"));
      s.outcome_seed = field<std::uint64_t>(o, "seed", 1);
    }
    s.estimands = field<std::vector<std::string>>(j, "estimands", {});
    s.replications = field<Index>(j, "replications", 100);
    if (s.replications < 1) throw InputError("replications must be at least 1");
    s.seed = field<std::uint64_t>(j, "seed", 1);
    s.threads = std::max(1u, field<unsigned>(j, "threads", 1));
    s.variance = field<bool>(j, "variance", true);
    s.exact_variance = field<bool>(j, "exact_variance", true);
    s.same_sign = field<bool>(j, "same_sign", false);
    s.union_exclusion = field<bool>(j, "union_exclusion", false);
    if (j.contains("randtest")) {
      const auto& r = j.at("randtest");
      check_keys(r, {"statistics", "summary", "draws", "alpha"}, "randtest");
      RandtestSpec t;
      for (const auto& name : field<std::vector<std::string>>(
               r, "statistics", {"ols_total_experience", "ols_average_experience", "intervention_diff"})) {
        t.statistics.push_back(parse_test_statistic(name));
      }
      t.summary = parse_summary_fn(field<std::string>(r, "summary", "mean"));
      t.draws = field<Index>(r, "draws", 500);
      t.alpha = field<double>(r, "alpha", 0.05);
      if (t.draws < 1) throw InputError("randtest draws must be at least 1");
      s.randtest = t;
    }
    if (s.estimands.empty() && !s.randtest) throw InputError("study needs estimands or a randtest block");
    if (j.contains("trend")) {
      const auto& t = j.at("trend");
      check_keys(t, {"n_outcome"}, "trend");
      s.trend_sizes = t.at("n_outcome").get<std::vector<Index>>();
      if (s.trend_sizes.size() < 2) throw InputError("trend needs at least two sizes");
      if (s.estimands.empty()) throw InputError("trend needs an estimand");
    }
    return s;
  } catch (const io::Json::exception& e) {
    throw InputError(std::string("study spec: ") + e.what());
  }
}

StudySpec load_study_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return parse_study_spec(io::Json::parse(in), path.parent_path());
  } catch (const io::Json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

namespace {

Estimate mean_se(const std::vector<double>& x) {
  const auto n = static_cast<double>(x.size());
  CompensatedSum sum;
  for (double v : x) sum.add(v);
  const double mean = sum.value() / n;
  CompensatedSum sq;
  for (double v : x) sq.add((v - mean) * (v - mean));
  const double var = x.size() > 1 ? sq.value() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

std::optional<double> closed_form_error_variance(const BipartiteGraph& g, const Design& d,
                                                 const PotentialOutcomeTable& po, const EstimandSpec& e,
                                                 std::span<const Index> retained) {
  switch (e.kind) {
    case EstimandKind::mean_po: return true_variance_mean_po(g, d, po, e.arm, retained);
    case EstimandKind::all_or_none: return true_variance_aon(g, d, po, retained);
    // The observed mean cancels from the error of the status-quo estimators.
    case EstimandKind::status_quo_vs_none: return true_variance_mean_po(g, d, po, 0, retained);
    case EstimandKind::all_vs_status_quo: return true_variance_mean_po(g, d, po, 1, retained);
    case EstimandKind::stochastic:
    case EstimandKind::stochastic_vs_observed: return true_variance_stochastic(g, d, po, *e.h, retained);
    case EstimandKind::stochastic_contrast:
      return true_variance_stochastic_contrast(g, d, po, *e.h, *e.h_prime, retained);
    case EstimandKind::plus_k: return std::nullopt;
  }
  return std::nullopt;
}

// Runs body(r) for r in [0, n) on up to `threads` workers; each index is
// handled by exactly one worker, so writes to per-index slots need no lock.
template <class F>
void parallel_for(Index n, unsigned threads, F&& body) {
  const auto workers = static_cast<Index>(std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n))));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (Index t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (Index r = t; r < n; r += workers) body(r);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

BipartiteGraph build_graph(const StudySpec& spec) {
  if (!spec.edges_file.empty()) return io::load_edges(spec.edges_file);
  return generate_graph(spec.family, spec.graph, spec.graph_seed);
}

}  // namespace

StudyReport run_study(const StudySpec& spec) {
  const auto g = build_graph(spec);
  const auto d = io::design_from_config(spec.design, g.n_intervention());
  const auto po = make_outcome_table(g, spec.outcome_family, spec.outcome_seed);

  StudyReport report;
  report.n_intervention = g.n_intervention();
  report.n_outcome = g.n_outcome();
  report.stats = graph_stats(g);
  report.graph_class = classify_graph(g).kind;
  report.design = d.describe();
  report.replications = spec.replications;
  report.seed = spec.seed;

  std::vector<EstimandSpec> estimands;
  std::vector<PositivityReport> screens;
  for (const auto& text : spec.estimands) {
    estimands.push_back(io::parse_estimand(text, g, d));
    screens.push_back(screen_positivity(g, d, estimands.back()));
  }
  if (spec.union_exclusion && !screens.empty()) {
    const auto common = common_retained(screens);
    for (auto& s : screens) s.retained = common;
  }
  for (std::size_t i = 0; i < estimands.size(); ++i) {
    if (screens[i].retained.empty()) {
      throw EmptyRetainedSet(estimands[i].id() + ": no outcome units retained after positivity screening");
    }
  }
  {
    const auto arm1 = screen_positivity(g, d, EstimandSpec::mean_po(1));
    if (!arm1.retained.empty()) report.consistency = consistency_statistics(g, d, 1, arm1.retained);
  }

  const std::size_t n_est = estimands.size();
  const std::size_t n_stat = spec.randtest ? spec.randtest->statistics.size() : 0;
  std::vector<std::optional<double>> fixed_target(n_est);
  for (std::size_t i = 0; i < n_est; ++i) {
    if (!is_random_estimand(estimands[i].kind)) {
      fixed_target[i] = exact_estimand(g, d, po, estimands[i], screens[i].retained);
    }
  }

  const auto reps = static_cast<std::size_t>(spec.replications);
  report.rows.resize(reps * n_est);
  report.test_rows.resize(reps * n_stat);
  VarianceOptions vopt;
  vopt.same_sign = spec.same_sign;

  parallel_for(spec.replications, spec.threads, [&](Index r) {
    const auto seed_r = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
    const auto w = d.sample(seed_r);
    const ObservedExperiment exp(g, d, w, po.observe(g, w));
    for (std::size_t i = 0; i < n_est; ++i) {
      auto& row = report.rows[static_cast<std::size_t>(r) * n_est + i];
      const auto& retained = screens[i].retained;
      row.replication = r;
      row.estimand = estimands[i].id();
      row.estimate = point_estimate(exp, estimands[i], retained);
      row.target = fixed_target[i] ? *fixed_target[i] : estimand_value(g, d, po, estimands[i], retained, w);
      if (spec.variance) row.bound = estimate_variance(exp, estimands[i], retained, vopt);
    }
    for (std::size_t s = 0; s < n_stat; ++s) {
      auto& row = report.test_rows[static_cast<std::size_t>(r) * n_stat + s];
      TestOptions topt;
      topt.statistic = spec.randtest->statistics[s];
      topt.summary = spec.randtest->summary;
      topt.draws = spec.randtest->draws;
      topt.seed = derive_seed(seed_r, s + 1);
      row.replication = r;
      row.statistic = statistic_id(topt.statistic, topt.summary);
      try {
        const auto res = randomization_test(exp, topt);
        row.t_observed = res.t_observed;
        row.p_value = res.p_value;
      } catch (const DegenerateStatistic&) {
        row.degenerate = true;
        row.t_observed = std::nan("");
        row.p_value = std::nan("");
      }
    }
  });

  for (std::size_t i = 0; i < n_est; ++i) {
    EstimandSummary s;
    s.id = estimands[i].id();
    s.random_target = !fixed_target[i].has_value();
    s.n_retained = static_cast<Index>(screens[i].retained.size());
    s.n_excluded = g.n_outcome() - s.n_retained;
    std::vector<double> target, error, sq, bound;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& row = report.rows[r * n_est + i];
      target.push_back(row.target);
      error.push_back(row.estimate - row.target);
      sq.push_back(error.back() * error.back());
      if (row.bound) bound.push_back(*row.bound);
    }
    s.target = mean_se(target);
    s.bias = mean_se(error);
    s.mse = mean_se(sq);
    s.empirical_variance = s.bias.se * s.bias.se * static_cast<double>(reps);
    if (!bound.empty()) s.mean_bound = mean_se(bound);
    if (spec.exact_variance) {
      s.true_variance = closed_form_error_variance(g, d, po, estimands[i], screens[i].retained);
    }
    report.estimands.push_back(std::move(s));
  }
  for (std::size_t t = 0; t < n_stat; ++t) {
    TestSummary s;
    s.id = statistic_id(spec.randtest->statistics[t], spec.randtest->summary);
    std::vector<double> reject;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& row = report.test_rows[r * n_stat + t];
      if (row.degenerate) {
        ++s.n_degenerate;
      } else {
        reject.push_back(row.p_value <= spec.randtest->alpha ? 1.0 : 0.0);
      }
    }
    s.n_tests = static_cast<Index>(reject.size());
    if (!reject.empty()) s.rejection_rate = mean_se(reject);
    report.tests.push_back(std::move(s));
  }
  return report;
}

TrendReport run_trend(const StudySpec& spec) {
  if (spec.trend_sizes.size() < 2) throw InputError("trend needs at least two sizes");
  if (spec.estimands.empty()) throw InputError("trend needs an estimand");
  TrendReport out;
  out.regime_ok = true;
  out.mse_decreasing = true;
  for (Index size : spec.trend_sizes) {
    auto s = spec;
    s.graph.n_outcome = size;
    s.graph.sizes.clear();
    s.edges_file.clear();
    out.studies.push_back(run_study(s));
    const auto& st = out.studies.back();
    if (!(static_cast<double>(st.stats.max_intervention_set_size) < std::log(static_cast<double>(st.n_outcome)))) {
      out.regime_ok = false;
    }
  }
  out.estimand = out.studies.front().estimands.front().id;
  for (std::size_t i = 1; i < out.studies.size(); ++i) {
    const auto& a = out.studies[i - 1].estimands.front().mse;
    const auto& b = out.studies[i].estimands.front().mse;
    if (!(b.value < a.value + std::hypot(a.se, b.se))) out.mse_decreasing = false;
  }
  return out;
}

namespace {

std::string full(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

io::Json opt(const std::optional<double>& v) { return v ? io::Json(*v) : io::Json(nullptr); }

io::Json to_json(const Estimate& e) { return io::Json{{"value", e.value}, {"se", e.se}}; }

}  // namespace

void write_csv(std::ostream& out, const StudyReport& report) {
  out << "replication,type,name,estimate,target,error,variance_bound,t_observed,p_value\n";
  for (const auto& r : report.rows) {
    out << r.replication << ",estimand," << r.estimand << ',' << full(r.estimate) << ',' << full(r.target) << ','
        << full(r.estimate - r.target) << ',' << (r.bound ? full(*r.bound) : "") << ",,\n";
  }
  for (const auto& t : report.test_rows) {
    out << t.replication << ",test," << t.statistic << ",,,,," << full(t.t_observed) << ',' << full(t.p_value)
        << '\n';
  }
}

io::Json to_json(const StudyReport& report) {
  io::Json estimands = io::Json::array();
  for (const auto& s : report.estimands) {
    estimands.push_back(io::Json{{"estimand", s.id},
                                 {"random_target", s.random_target},
                                 {"n_retained", s.n_retained},
                                 {"n_excluded", s.n_excluded},
                                 {"target", to_json(s.target)},
                                 {"bias", to_json(s.bias)},
                                 {"mse", to_json(s.mse)},
                                 {"empirical_variance", s.empirical_variance},
                                 {"mean_variance_bound", s.mean_bound ? to_json(*s.mean_bound) : io::Json(nullptr)},
                                 {"true_variance", opt(s.true_variance)}});
  }
  io::Json tests = io::Json::array();
  for (const auto& t : report.tests) {
    tests.push_back(io::Json{{"statistic", t.id},
                             {"n_tests", t.n_tests},
                             {"n_degenerate", t.n_degenerate},
                             {"rejection_rate", to_json(t.rejection_rate)}});
  }
  return io::Json{{"graph",
                   {{"n_intervention", report.n_intervention},
                    {"n_outcome", report.n_outcome},
                    {"class", to_string(report.graph_class)},
                    {"stats", io::to_json(report.stats)}}},
                  {"design", report.design},
                  {"replications", report.replications},
                  {"seed", report.seed},
                  {"consistency", report.consistency ? io::to_json(*report.consistency) : io::Json(nullptr)},
                  {"estimands", estimands},
                  {"tests", tests}};
}

io::Json to_json(const TrendReport& report) {
  io::Json sizes = io::Json::array();
  for (const auto& s : report.studies) {
    const auto& e = s.estimands.front();
    sizes.push_back(io::Json{{"n_outcome", s.n_outcome},
                             {"n_intervention", s.n_intervention},
                             {"mse", to_json(e.mse)},
                             {"bias", to_json(e.bias)},
                             {"consistency", s.consistency ? io::to_json(*s.consistency) : io::Json(nullptr)}});
  }
  return io::Json{{"estimand", report.estimand},
                  {"regime_ok", report.regime_ok},
                  {"mse_decreasing", report.mse_decreasing},
                  {"sizes", sizes}};
}

}  // namespace bipartite::sim
