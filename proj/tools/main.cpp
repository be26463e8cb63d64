// Command-line front end: describe, positivity, estimate, randtest,
// simulate, oracle-check.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bipartite/io.hpp"
#include "bipartite/oracle.hpp"
#include "bipartite/sim.hpp"

namespace fs = std::filesystem;
using namespace bipartite;
using io::Json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInput = 2, kEmptyRetained = 3, kCapExceeded = 4 };

struct Options {
  std::string edges;
  Index n_intervention = 0;
  Index n_outcome = 0;
  std::string design;
  std::string treatment;
  std::string outcomes;
  std::string po_table;
  std::string spec;
  std::vector<std::string> estimands;
  std::vector<std::string> statistics;
  std::string summary_fn = "mean";
  std::string json;
  std::string out_csv;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  Index draws = 1000;
  std::size_t cap = 0;
  bool union_exclusion = false;
  bool same_sign = false;
  bool drop_isolated = false;
};

std::string command_line;
bool json_to_stdout = false;

// Tables move to stderr when stdout carries the JSON report.
std::ostream& text() { return json_to_stdout ? std::cerr : std::cout; }

// Fixed-width text table; the first column is left aligned.
class Table {
 public:
  explicit Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  void print(std::ostream& out, const std::string& title) const {
    std::vector<std::size_t> width(rows_.front().size(), 0);
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    out << title << '\n' << std::string(total, '-') << '\n';
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      for (std::size_t c = 0; c < rows_[i].size(); ++c) {
        const auto& cell = rows_[i][c];
        const auto pad = std::string(width[c] - cell.size(), ' ');
        out << (c == 0 ? cell + pad : pad + cell) << "  ";
      }
      out << '\n';
      if (i == 0) out << std::string(total, '-') << '\n';
    }
    out << std::string(total, '-') << '\n';
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string fmt(double x) { return io::format6(x); }

// Graph and design with optional isolated-unit removal. `ids[i]` is the
// original 0-based outcome index of working unit i.
struct Setup {
  BipartiteGraph graph{1, 1, {{0, 0}}};
  Design design = Design::crd(1, 0);
  BipartiteGraph full{1, 1, {{0, 0}}};
  std::vector<Index> ids;
  io::RunManifest manifest;
};

Setup load_setup(const Options& o) {
  Setup s;
  auto g = io::load_edges(o.edges, o.n_intervention, o.n_outcome);
  io::Config config;
  if (fs::exists(o.design)) {
    config = io::load_config(o.design);
  } else if (o.design.find('=') != std::string::npos) {
    config = io::parse_inline_config(o.design, fs::current_path());
  } else {
    throw InputError("design '" + o.design + "' is neither a config file nor an inline kind=...,key=... list");
  }
  s.design = io::design_from_config(config, g.n_intervention());
  for (Index m = 0; m < g.n_outcome(); ++m) {
    if (!o.drop_isolated || g.intervention_set_size(m) > 0) s.ids.push_back(m);
  }
  if (s.ids.empty()) throw InputError("every outcome unit is isolated");
  s.graph = o.drop_isolated ? g.restrict_outcomes(s.ids) : g;
  s.full = std::move(g);
  s.manifest = io::make_manifest(command_line, s.design.describe(), o.seed);
  s.manifest.add_input(o.edges);
  if (fs::exists(o.design)) s.manifest.add_input(o.design);
  return s;
}

Vector select(const Vector& y, const std::vector<Index>& ids) {
  Vector out(static_cast<Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) out[static_cast<Index>(i)] = y[ids[i]];
  return out;
}

std::vector<std::string> default_estimands(const std::vector<std::string>& given) {
  if (!given.empty()) return given;
  return {"mean0", "mean1", "aon", "sq1", "sq0"};
}

std::size_t enumeration_cap(const Options& o) { return o.cap ? o.cap : kDefaultEnumerationCap; }

struct Screened {
  std::vector<EstimandSpec> specs;
  std::vector<PositivityReport> reports;
};

Screened screen_all(const Setup& s, const Options& o) {
  Screened out;
  for (const auto& text : default_estimands(o.estimands)) {
    out.specs.push_back(io::parse_estimand(text, s.graph, s.design));
    out.reports.push_back(screen_positivity(s.graph, s.design, out.specs.back(), enumeration_cap(o)));
  }
  if (o.union_exclusion) {
    const auto common = common_retained(out.reports);
    for (auto& r : out.reports) {
      std::vector<Violation> excluded;
      for (Index m = 0; m < s.graph.n_outcome(); ++m) {
        if (std::binary_search(common.begin(), common.end(), m)) continue;
        const auto own = std::find_if(r.excluded.begin(), r.excluded.end(),
                                      [&](const Violation& v) { return v.unit == m; });
        excluded.push_back(own != r.excluded.end() ? *own : Violation{m, "excluded for another estimand"});
      }
      r.excluded = std::move(excluded);
      r.retained = common;
    }
  }
  return out;
}

// Reports use the original outcome ids.
PositivityReport to_original_ids(PositivityReport r, const std::vector<Index>& ids) {
  for (auto& v : r.excluded) v.unit = ids[v.unit];
  for (auto& m : r.retained) m = ids[m];
  return r;
}

void emit_json(const Options& o, const io::RunManifest& manifest, Json body) {
  if (o.json.empty()) return;
  body["manifest"] = io::to_json(manifest);
  if (o.json == "-") {
    std::cout << body.dump(2) << '\n';
    return;
  }
  std::ofstream out(o.json);
  if (!out) throw InputError("cannot write " + o.json);
  out << body.dump(2) << '\n';
}

void print_manifest(const io::RunManifest& m) {
  text() << "# " << m.command << "\n# tool " << m.tool_version << ", design " << m.design << ", seed " << m.seed
            << ", " << m.timestamp << '\n';
  for (const auto& [path, hash] : m.inputs) text() << "# input " << path << " fnv1a64 " << hash << '\n';
}

int cmd_describe(const Options& o) {
  const auto g = io::load_edges(o.edges, o.n_intervention, o.n_outcome);
  auto manifest = io::make_manifest(command_line, "", o.seed);
  manifest.add_input(o.edges);
  const auto s = graph_stats(g);
  const auto c = classify_graph(g);
  print_manifest(manifest);
  Table t({"Statistic", "Value"});
  t.add({"Intervention units", std::to_string(g.n_intervention())});
  t.add({"Outcome units", std::to_string(g.n_outcome())});
  t.add({"Edges", std::to_string(g.n_edges())});
  t.add({"Density (%)", fmt(s.density_pct)});
  t.add({"Avg intervention units per outcome", fmt(s.avg_intervention_set_size)});
  t.add({"Avg outcome units per intervention", fmt(s.avg_outcome_set_size)});
  t.add({"Max intervention set (d_o)", std::to_string(s.max_intervention_set_size)});
  t.add({"Max outcome set", std::to_string(s.max_outcome_set_size)});
  t.add({"Max pairwise overlap (d_kappa)", std::to_string(s.max_pairwise_overlap)});
  t.add({"Overlapping outcome pairs (kappa)", std::to_string(s.n_overlapping_pairs)});
  t.add({"Isolated outcome units", std::to_string(s.n_isolated_outcomes)});
  t.add({"Outcomes with one intervention (%)", fmt(s.pct_outcomes_single_parent)});
  t.add({"Interventions with two outcomes (%)", fmt(s.pct_interventions_two_outcomes)});
  t.add({"Graph class", to_string(c.kind)});
  t.print(text(), "Descriptive statistics of the bipartite graph");
  emit_json(o, manifest, Json{{"stats", io::to_json(s)}, {"classification", io::to_json(c)}});
  return kOk;
}

int cmd_positivity(const Options& o) {
  const auto s = load_setup(o);
  const auto screened = screen_all(s, o);
  print_manifest(s.manifest);
  Table t({"Estimand", "Excluded", "Retained", "Excluded units"});
  Json reports = Json::array();
  for (const auto& raw : screened.reports) {
    const auto r = to_original_ids(raw, s.ids);
    std::string units;
    for (const auto& v : r.excluded) units += (units.empty() ? "" : " ") + std::to_string(v.unit + 1);
    t.add({r.estimand_id, std::to_string(r.excluded.size()), std::to_string(r.retained.size()), units});
    reports.push_back(io::to_json(r));
  }
  t.print(text(), std::string("Number of outcome units violating positivity") +
                         (o.union_exclusion ? " (union exclusion)" : ""));
  emit_json(o, s.manifest, Json{{"positivity", reports}});
  return kOk;
}

int cmd_estimate(const Options& o) {
  auto s = load_setup(o);
  const auto w = io::load_treatment(o.treatment, s.graph.n_intervention());
  const auto y_all = io::load_outcomes(o.outcomes, s.full.n_outcome());
  s.manifest.add_input(o.treatment);
  s.manifest.add_input(o.outcomes);
  const ObservedExperiment exp(s.graph, s.design, w, select(y_all, s.ids));
  const auto screened = screen_all(s, o);
  VarianceOptions vopt;
  vopt.same_sign = o.same_sign;
  vopt.cap = enumeration_cap(o);
  std::vector<EstimateReport> results;
  for (std::size_t i = 0; i < screened.specs.size(); ++i) {
    const auto& r = screened.reports[i];
    if (r.retained.empty()) {
      throw EmptyRetainedSet(r.estimand_id + ": no outcome units retained after positivity screening");
    }
    results.push_back(estimate(exp, screened.specs[i], r.retained, static_cast<Index>(r.excluded.size()), vopt));
  }
  print_manifest(s.manifest);
  Table t({"Estimand", "Estimate", "Retained", "Excluded", "Effective"});
  Json reports = Json::array();
  for (const auto& r : results) {
    const auto se = r.standard_error();
    t.add({r.estimand_id, fmt(r.point_estimate) + " (" + (se ? fmt(*se) : std::string("-")) + ")",
           std::to_string(r.n_retained), std::to_string(r.n_excluded), std::to_string(r.effective_units)});
    reports.push_back(io::to_json(r));
  }
  t.print(text(), "Estimates and standard errors (in parentheses)");
  emit_json(o, s.manifest, Json{{"estimates", reports}});
  return kOk;
}

int cmd_randtest(const Options& o) {
  auto s = load_setup(o);
  const auto w = io::load_treatment(o.treatment, s.graph.n_intervention());
  const auto y = select(io::load_outcomes(o.outcomes, s.full.n_outcome()), s.ids);
  s.manifest.add_input(o.treatment);
  s.manifest.add_input(o.outcomes);
  const ObservedExperiment exp(s.graph, s.design, w, y);
  auto stats = o.statistics;
  if (stats.empty()) stats = {"ols_total_experience", "ols_average_experience", "intervention_diff"};
  print_manifest(s.manifest);
  Table t({"Statistic", "T_obs", "p-value", "Draws", "Mode", "Degenerate draws"});
  Json results = Json::array();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    TestOptions topt;
    topt.statistic = parse_test_statistic(stats[i]);
    topt.summary = parse_summary_fn(o.summary_fn);
    topt.draws = o.draws;
    topt.threads = o.threads;
    topt.seed = derive_seed(o.seed, i);
    try {
      const auto r = randomization_test(exp, topt);
      t.add({r.statistic_id, fmt(r.t_observed), fmt(r.p_value), std::to_string(r.n_draws),
             r.exhaustive ? "exhaustive" : "monte carlo", std::to_string(r.n_degenerate_draws)});
      results.push_back(io::to_json(r));
    } catch (const DegenerateStatistic& e) {
      t.add({statistic_id(topt.statistic, topt.summary), "undefined", "-", "0", "-", "-"});
      results.push_back(Json{{"statistic", statistic_id(topt.statistic, topt.summary)}, {"error", e.what()}});
    }
  }
  t.print(text(), "P-values for randomization tests of the sharp null");
  emit_json(o, s.manifest, Json{{"tests", results}});
  return kOk;
}

int cmd_simulate(const Options& o) {
  auto spec = sim::load_study_spec(o.spec);
  spec.seed = o.seed;
  if (o.threads > 1) spec.threads = o.threads;
  if (o.union_exclusion) spec.union_exclusion = true;
  if (o.same_sign) spec.same_sign = true;
  std::string design;
  for (const auto& [key, value] : spec.design.values) design += (design.empty() ? "" : ",") + key + "=" + value;
  auto manifest = io::make_manifest(command_line, design, o.seed);
  manifest.add_input(o.spec);
  if (!spec.edges_file.empty()) manifest.add_input(spec.edges_file);
  print_manifest(manifest);

  const auto print_study = [](const sim::StudyReport& r) {
    Table t({"Estimand", "Bias (SE)", "Emp. var", "Mean bound (SE)", "True var", "MSE (SE)", "Retained"});
    for (const auto& e : r.estimands) {
      t.add({e.id, fmt(e.bias.value) + " (" + fmt(e.bias.se) + ")", fmt(e.empirical_variance),
             e.mean_bound ? fmt(e.mean_bound->value) + " (" + fmt(e.mean_bound->se) + ")" : "-",
             e.true_variance ? fmt(*e.true_variance) : "-", fmt(e.mse.value) + " (" + fmt(e.mse.se) + ")",
             std::to_string(e.n_retained)});
    }
    std::ostringstream title;
    title << "Study: M = " << r.n_outcome << ", N = " << r.n_intervention << ", " << to_string(r.graph_class)
          << ", " << r.design << ", " << r.replications << " replications";
    if (!r.estimands.empty()) t.print(text(), title.str());
    if (!r.tests.empty()) {
      Table tt({"Statistic", "Rejection rate (SE)", "Tests", "Degenerate"});
      for (const auto& s : r.tests) {
        tt.add({s.id, fmt(s.rejection_rate.value) + " (" + fmt(s.rejection_rate.se) + ")",
                std::to_string(s.n_tests), std::to_string(s.n_degenerate)});
      }
      tt.print(text(), "Randomization tests");
    }
    if (r.consistency) {
      const auto& c = *r.consistency;
      text() << "consistency (arm 1): gamma " << (c.gamma ? fmt(*c.gamma) : "-") << ", gamma* "
                << (c.gamma_star ? fmt(*c.gamma_star) : "-") << ", kappa " << c.kappa << ", d_o " << c.d_o
                << ", d_kappa " << c.d_kappa << '\n';
    }
  };

  std::ofstream csv;
  if (!o.out_csv.empty()) {
    csv.open(o.out_csv);
    if (!csv) throw InputError("cannot write " + o.out_csv);
  }
  if (!spec.trend_sizes.empty()) {
    const auto trend = sim::run_trend(spec);
    for (const auto& r : trend.studies) {
      print_study(r);
      if (csv.is_open()) sim::write_csv(csv, r);
    }
    text() << "trend " << trend.estimand << ": regime " << (trend.regime_ok ? "ok" : "violated")
              << ", MSE decreasing " << (trend.mse_decreasing ? "yes" : "no") << '\n';
    emit_json(o, manifest, Json{{"trend", sim::to_json(trend)}});
    return kOk;
  }
  const auto report = sim::run_study(spec);
  print_study(report);
  if (csv.is_open()) sim::write_csv(csv, report);
  emit_json(o, manifest, Json{{"study", sim::to_json(report)}});
  return kOk;
}

int cmd_oracle_check(const Options& o) {
  auto s = load_setup(o);
  const auto full_po = io::load_po_table(o.po_table, s.full);
  std::vector<std::vector<double>> kept;
  for (Index m : s.ids) kept.emplace_back(full_po.unit(m).begin(), full_po.unit(m).end());
  const PotentialOutcomeTable po(s.graph, std::move(kept));
  s.manifest.add_input(o.po_table);
  const std::size_t cap = o.cap ? o.cap : kDefaultOracleCap;
  const auto screened = screen_all(s, o);
  VarianceOptions vopt;
  vopt.same_sign = o.same_sign;
  print_manifest(s.manifest);
  Table t({"Estimand", "Target", "E[estimate]", "Bias", "Var(error)", "E[bound]", "Conservative"});
  Json rows = Json::array();
  for (std::size_t i = 0; i < screened.specs.size(); ++i) {
    const auto& spec = screened.specs[i];
    const auto& retained = screened.reports[i].retained;
    if (retained.empty()) throw EmptyRetainedSet(spec.id() + ": no outcome units retained");
    const bool random = is_random_estimand(spec.kind);
    const double bias = exact_bias(s.graph, s.design, po, spec, retained, cap);
    const double var = exact_error_variance(s.graph, s.design, po, spec, retained, cap);
    std::optional<double> target, expectation, bound;
    if (!random) {
      target = exact_estimand(s.graph, s.design, po, spec, retained);
      expectation = exact_expectation(s.graph, s.design, po, spec, retained, cap);
    }
    if (spec.kind != EstimandKind::plus_k) {
      bound = exact_expected_variance_bound(s.graph, s.design, po, spec, retained, vopt, cap);
    }
    const bool conservative = bound && *bound >= var - Tolerances::kOracle;
    t.add({spec.id(), target ? fmt(*target) : "random", expectation ? fmt(*expectation) : "-", fmt(bias),
           fmt(var), bound ? fmt(*bound) : "-", bound ? (conservative ? "yes" : "NO") : "-"});
    rows.push_back(Json{{"estimand", spec.id()},
                        {"target", target ? Json(*target) : Json(nullptr)},
                        {"expectation", expectation ? Json(*expectation) : Json(nullptr)},
                        {"bias", bias},
                        {"error_variance", var},
                        {"expected_bound", bound ? Json(*bound) : Json(nullptr)},
                        {"n_retained", retained.size()}});
  }
  t.print(text(), "Exact enumeration over the design support");
  emit_json(o, s.manifest, Json{{"oracle", rows}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Design-based inference for bipartite interference experiments"};
  app.require_subcommand(1);
  Options o;

  const auto graph_opts = [&](CLI::App* c) {
    c->add_option("-g,--edges", o.edges, "edge CSV (intervention_id,outcome_id)")->required()->check(CLI::ExistingFile);
    c->add_option("--n-intervention", o.n_intervention, "number of intervention units (default: largest id)");
    c->add_option("--n-outcome", o.n_outcome, "number of outcome units (default: largest id)");
  };
  const auto design_opts = [&](CLI::App* c) {
    c->add_option("-d,--design", o.design, "design config file or inline kind=...,key=... list")->required();
    c->add_flag("--drop-isolated", o.drop_isolated, "remove outcome units with no intervention units");
  };
  const auto estimand_opts = [&](CLI::App* c) {
    c->add_option("-e,--estimand", o.estimands,
                  "mean0 mean1 aon sq1 sq0 plus_K stoch:P stoch_sq:P contrast:P,P' (repeatable)");
    c->add_flag("--union-exclusion", o.union_exclusion, "drop units violating positivity for any estimand");
    c->add_option("--cap", o.cap, "enumeration cap");
  };
  const auto json_opt = [&](CLI::App* c) {
    c->add_option("--json", o.json, "JSON sidecar path ('-' for stdout)");
  };

  auto* describe = app.add_subcommand("describe", "graph statistics and classification");
  graph_opts(describe);
  json_opt(describe);

  auto* positivity = app.add_subcommand("positivity", "positivity screening per estimand");
  graph_opts(positivity);
  design_opts(positivity);
  estimand_opts(positivity);
  json_opt(positivity);

  auto* est = app.add_subcommand("estimate", "point estimates and variance bounds");
  graph_opts(est);
  design_opts(est);
  estimand_opts(est);
  json_opt(est);
  est->add_option("-w,--treatment", o.treatment, "treatment CSV")->required()->check(CLI::ExistingFile);
  est->add_option("-y,--outcomes", o.outcomes, "outcome CSV")->required()->check(CLI::ExistingFile);
  est->add_flag("--same-sign", o.same_sign, "assert all potential outcomes share one sign");

  auto* rt = app.add_subcommand("randtest", "Fisher randomization tests of the sharp null");
  graph_opts(rt);
  design_opts(rt);
  json_opt(rt);
  rt->add_option("-w,--treatment", o.treatment, "treatment CSV")->required()->check(CLI::ExistingFile);
  rt->add_option("-y,--outcomes", o.outcomes, "outcome CSV")->required()->check(CLI::ExistingFile);
  rt->add_option("--stat", o.statistics, "ols_total_experience ols_average_experience intervention_diff");
  rt->add_option("--summary-fn", o.summary_fn, "mean, sum or median (intervention_diff)");
  rt->add_option("--draws", o.draws, "Monte Carlo draws")->check(CLI::PositiveNumber);
  rt->add_option("--seed", o.seed, "random seed")->required();
  rt->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study from a JSON spec");
  simulate->add_option("-s,--spec", o.spec, "study spec JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", o.seed, "random seed")->required();
  simulate->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out-csv", o.out_csv, "long-format CSV of every replication");
  simulate->add_flag("--union-exclusion", o.union_exclusion, "drop units violating positivity for any estimand");
  simulate->add_flag("--same-sign", o.same_sign, "assert all potential outcomes share one sign");
  json_opt(simulate);

  auto* oracle = app.add_subcommand("oracle-check", "exact bias and variance by enumeration");
  graph_opts(oracle);
  design_opts(oracle);
  estimand_opts(oracle);
  json_opt(oracle);
  oracle->add_option("-p,--po-table", o.po_table, "potential-outcome table CSV")->required()->check(CLI::ExistingFile);
  oracle->add_flag("--same-sign", o.same_sign, "assert all potential outcomes share one sign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  json_to_stdout = o.json == "-";
  try {
    if (*describe) return cmd_describe(o);
    if (*positivity) return cmd_positivity(o);
    if (*est) return cmd_estimate(o);
    if (*rt) return cmd_randtest(o);
    if (*simulate) return cmd_simulate(o);
    if (*oracle) return cmd_oracle_check(o);
  } catch (const EmptyRetainedSet& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEmptyRetained;
  } catch (const EnumerationCapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCapExceeded;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const DegenerateStatistic& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
