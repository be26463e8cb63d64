#ifndef BIPARTITE_RANDTEST_HPP
#define BIPARTITE_RANDTEST_HPP

#include <cstdint>
#include <span>
#include <string>

#include "bipartite/estimators.hpp"

namespace bipartite {

enum class TestStatistic { ols_total_experience, ols_average_experience, intervention_diff };
enum class SummaryFn { mean, sum, median };

std::string to_string(TestStatistic s);
std::string to_string(SummaryFn f);
TestStatistic parse_test_statistic(const std::string& name);
SummaryFn parse_summary_fn(const std::string& name);

/// Identifier used in reports, e.g. "intervention_diff_means".
std::string statistic_id(TestStatistic s, SummaryFn f = SummaryFn::mean);

/// W^tot_m = number of treated units in N_m.
Vector total_experience(const BipartiteGraph& g, std::span<const std::uint8_t> w);
/// W^tot_m / N_m; NaN for isolated outcome units.
Vector average_experience(const BipartiteGraph& g, std::span<const std::uint8_t> w);

/// Slope of the simple regression of y on x. Entries with NaN x are skipped.
/// Throws DegenerateStatistic when fewer than two usable units remain or x is
/// constant on them.
double statistic_ols(const Vector& x, const Vector& y);

/// Mean over treated intervention units of f(Y over M_n) minus the same over
/// controls. Units with empty outcome sets are skipped. Throws
/// DegenerateStatistic when either arm is empty after skipping.
double statistic_intervention_diff(const BipartiteGraph& g, std::span<const std::uint8_t> w,
                                   const Vector& y, SummaryFn f = SummaryFn::mean);

double compute_statistic(const BipartiteGraph& g, std::span<const std::uint8_t> w, const Vector& y,
                         TestStatistic s, SummaryFn f = SummaryFn::mean);

struct TestOptions {
  TestStatistic statistic = TestStatistic::ols_total_experience;
  SummaryFn summary = SummaryFn::mean;
  Index draws = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Enumerate the design when its support is at most this large.
  std::uint64_t exhaustive_limit = 10000;
  /// Redraws allowed per Monte Carlo draw before giving up.
  Index max_redraws = 1000;
};

struct TestResult {
  std::string statistic_id;
  double t_observed = 0.0;
  Index n_draws = 0;
  double p_value = 1.0;
  Index n_degenerate_draws = 0;
  bool exhaustive = false;
};

/// Fisher randomization test of the sharp null of no effect. Outcomes stay
/// fixed while the assignment is redrawn from the design. Monte Carlo mode
/// reports (1 + #{|T_r| >= |T_obs|}) / (R + 1); exhaustive mode reports the
/// design probability of {|T| >= |T_obs|}, conditional on a well-defined
/// statistic. Results do not depend on the thread count.
TestResult randomization_test(const ObservedExperiment& exp, const TestOptions& options);

}  // namespace bipartite

#endif  // BIPARTITE_RANDTEST_HPP
