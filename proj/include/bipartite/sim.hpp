#ifndef BIPARTITE_SIM_HPP
#define BIPARTITE_SIM_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bipartite/io.hpp"

namespace bipartite::sim {

enum class GraphFamily { one_to_one, single_parent, partial, general };

std::string to_string(GraphFamily f);
GraphFamily parse_graph_family(const std::string& name);

/// Unused fields are ignored by families that do not need them.
struct GraphParams {
  Index n_intervention = 0;
  Index n_outcome = 0;
  std::vector<Index> sizes;  // single_parent: outcome units per intervention unit
  Index clusters = 2;        // partial
  Index max_set = 3;         // largest intervention set drawn (d_o target)
  double overlap_rate = 0.1; // general: target share of outcome pairs that overlap
};

/// one_to_one: identity on n_outcome (or n_intervention) units.
/// single_parent: explicit sizes, or n_outcome units split over
///   n_intervention parents, or cluster sizes drawn from 1..max_set.
/// partial: `clusters` disconnected blocks, at least one with overlapping sets.
/// general: every outcome unit draws 1..max_set parents uniformly; when
///   n_intervention is 0 it is chosen so pairs overlap at about overlap_rate.
/// Throws InputError on infeasible parameters.
BipartiteGraph generate_graph(GraphFamily family, const GraphParams& params, std::uint64_t seed);

struct RandtestSpec {
  std::vector<TestStatistic> statistics;
  SummaryFn summary = SummaryFn::mean;
  Index draws = 500;
  double alpha = 0.05;
};

struct StudySpec {
  GraphFamily family = GraphFamily::single_parent;
  GraphParams graph;
  std::uint64_t graph_seed = 1;
  std::filesystem::path edges_file;  // overrides the generator when set

  io::Config design;
  OutcomeFamily outcome_family = OutcomeFamily::additive;
  std::uint64_t outcome_seed = 1;
  std::vector<std::string> estimands;

  Index replications = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool variance = true;
  bool exact_variance = true;  // closed-form true variance for fixed estimands
  bool same_sign = false;
  bool union_exclusion = false;
  std::optional<RandtestSpec> randtest;
  std::vector<Index> trend_sizes;  // n_outcome sequence for a trend study
};

/// JSON study spec; relative file paths resolve against base_dir.
StudySpec parse_study_spec(const io::Json& j, const std::filesystem::path& base_dir = ".");
StudySpec load_study_spec(const std::filesystem::path& path);

struct EstimandRow {
  Index replication = 0;
  std::string estimand;
  double estimate = 0.0;
  double target = 0.0;
  std::optional<double> bound;
};

struct TestRow {
  Index replication = 0;
  std::string statistic;
  double t_observed = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // observed statistic undefined; no p-value
};

/// Monte Carlo aggregate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct EstimandSummary {
  std::string id;
  bool random_target = false;
  Index n_retained = 0;
  Index n_excluded = 0;
  Estimate target;  // constant for fixed estimands
  Estimate bias;
  Estimate mse;
  double empirical_variance = 0.0;  // of the estimate minus its target
  std::optional<Estimate> mean_bound;
  std::optional<double> true_variance;
};

struct TestSummary {
  std::string id;
  Index n_tests = 0;
  Index n_degenerate = 0;
  Estimate rejection_rate;
};

struct StudyReport {
  Index n_intervention = 0;
  Index n_outcome = 0;
  GraphStats stats;
  GraphClass graph_class = GraphClass::general;
  std::string design;
  Index replications = 0;
  std::uint64_t seed = 0;
  std::optional<ConsistencyStats> consistency;  // arm 1 on its retained units
  std::vector<EstimandSummary> estimands;
  std::vector<TestSummary> tests;
  std::vector<EstimandRow> rows;
  std::vector<TestRow> test_rows;
};

/// Draws W from the design once per replication (seeded by replication
/// index) with the potential outcomes held fixed. Deterministic for any
/// thread count.
StudyReport run_study(const StudySpec& spec);

struct TrendReport {
  std::string estimand;  // the first estimand in the spec
  std::vector<StudyReport> studies;
  bool regime_ok = false;     // d_o < log M at every size
  bool mse_decreasing = false;  // each step down, allowing one standard error
};

/// One study per trend size, with n_outcome set to that size.
TrendReport run_trend(const StudySpec& spec);

/// Long format: one row per replication and estimand, then one per test.
void write_csv(std::ostream& out, const StudyReport& report);
io::Json to_json(const StudyReport& report);
io::Json to_json(const TrendReport& report);

}  // namespace bipartite::sim

#endif  // BIPARTITE_SIM_HPP
