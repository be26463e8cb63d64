#include "bipartite/randtest.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace bipartite {

std::string to_string(TestStatistic s) {
  switch (s) {
    case TestStatistic::ols_total_experience: return "ols_total_experience";
    case TestStatistic::ols_average_experience: return "ols_average_experience";
    case TestStatistic::intervention_diff: return "intervention_diff";
  }
  return "?";
}

std::string to_string(SummaryFn f) {
  switch (f) {
    case SummaryFn::mean: return "mean";
    case SummaryFn::sum: return "sum";
    case SummaryFn::median: return "median";
  }
  return "?";
}

TestStatistic parse_test_statistic(const std::string& name) {
  if (name == "ols_total_experience" || name == "ols_total") return TestStatistic::ols_total_experience;
  if (name == "ols_average_experience" || name == "ols_average") return TestStatistic::ols_average_experience;
  if (name == "intervention_diff" || name == "intervention_diff_means") return TestStatistic::intervention_diff;
  throw InputError("unknown test statistic '" + name + "'");
}

SummaryFn parse_summary_fn(const std::string& name) {
  if (name == "mean") return SummaryFn::mean;
  if (name == "sum") return SummaryFn::sum;
  if (name == "median") return SummaryFn::median;
  throw InputError("unknown summary function '" + name + "'");
}

std::string statistic_id(TestStatistic s, SummaryFn f) {
  if (s != TestStatistic::intervention_diff) return to_string(s);
  return "intervention_diff_" + to_string(f) + "s";
}

Vector total_experience(const BipartiteGraph& g, std::span<const std::uint8_t> w) {
  if (static_cast<Index>(w.size()) != g.n_intervention()) throw InputError("treatment vector has wrong length");
  Vector x(g.n_outcome());
  for (Index m = 0; m < g.n_outcome(); ++m) {
    Index t = 0;
    for (Index n : g.intervention_set(m)) t += w[n];
    x[m] = static_cast<double>(t);
  }
  return x;
}

Vector average_experience(const BipartiteGraph& g, std::span<const std::uint8_t> w) {
  Vector x = total_experience(g, w);
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto size = g.intervention_set_size(m);
    x[m] = size ? x[m] / static_cast<double>(size) : std::nan("");
  }
  return x;
}

double statistic_ols(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw InputError("experience and outcome vectors differ in length");
  CompensatedSum sx, sy;
  Index n = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) continue;
    sx.add(x[i]);
    sy.add(y[i]);
    ++n;
  }
  if (n < 2) throw DegenerateStatistic("fewer than two units with defined experience");
  const double xbar = sx.value() / static_cast<double>(n);
  const double ybar = sy.value() / static_cast<double>(n);
  CompensatedSum sxy, sxx;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) continue;
    sxy.add((x[i] - xbar) * (y[i] - ybar));
    sxx.add((x[i] - xbar) * (x[i] - xbar));
  }
  if (sxx.value() <= 0.0) throw DegenerateStatistic("experience is constant across units");
  return sxy.value() / sxx.value();
}

namespace {

double summarize(std::vector<double>& v, SummaryFn f) {
  if (f == SummaryFn::median) {
    std::sort(v.begin(), v.end());
    const auto k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
  }
  CompensatedSum s;
  for (double a : v) s.add(a);
  return f == SummaryFn::sum ? s.value() : s.value() / static_cast<double>(v.size());
}

}  // namespace

double statistic_intervention_diff(const BipartiteGraph& g, std::span<const std::uint8_t> w,
                                   const Vector& y, SummaryFn f) {
  if (static_cast<Index>(w.size()) != g.n_intervention()) throw InputError("treatment vector has wrong length");
  if (y.size() != g.n_outcome()) throw InputError("outcome vector has wrong length");
  CompensatedSum arm[2];
  Index count[2] = {0, 0};
  std::vector<double> values;
  for (Index n = 0; n < g.n_intervention(); ++n) {
    const auto set = g.outcome_set(n);
    if (set.empty()) continue;
    values.clear();
    for (Index m : set) values.push_back(y[m]);
    arm[w[n]].add(summarize(values, f));
    ++count[w[n]];
  }
  if (count[0] == 0 || count[1] == 0) {
    throw DegenerateStatistic("intervention-level statistic needs treated and control units");
  }
  return arm[1].value() / static_cast<double>(count[1]) - arm[0].value() / static_cast<double>(count[0]);
}

double compute_statistic(const BipartiteGraph& g, std::span<const std::uint8_t> w, const Vector& y,
                         TestStatistic s, SummaryFn f) {
  switch (s) {
    case TestStatistic::ols_total_experience: return statistic_ols(total_experience(g, w), y);
    case TestStatistic::ols_average_experience: return statistic_ols(average_experience(g, w), y);
    case TestStatistic::intervention_diff: return statistic_intervention_diff(g, w, y, f);
  }
  return 0.0;
}

namespace {

// Runs body(i) for i in [0, n) split into contiguous blocks, one per thread.
template <class F>
void parallel_for(Index n, unsigned threads, F&& body) {
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Index>(n, 1))));
  if (threads == 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const Index block = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const Index end = std::min(n, (t + 1) * block);
        for (Index i = t * block; i < end; ++i) body(i);
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

}  // namespace

TestResult randomization_test(const ObservedExperiment& exp, const TestOptions& options) {
  const auto& g = exp.graph();
  const auto& d = exp.design();
  const Vector& y = exp.y();
  TestResult result;
  result.statistic_id = statistic_id(options.statistic, options.summary);
  result.t_observed = compute_statistic(g, exp.w(), y, options.statistic, options.summary);
  const double threshold = std::abs(result.t_observed) - Tolerances::kStatisticTie;

  const Integer support = d.support_size();
  if (support <= options.exhaustive_limit) {
    const auto all = d.enumerate(static_cast<std::size_t>(options.exhaustive_limit));
    std::vector<double> stat(all.size());
    std::vector<std::uint8_t> ok(all.size(), 1);
    parallel_for(static_cast<Index>(all.size()), options.threads, [&](Index i) {
      try {
        stat[i] = compute_statistic(g, all[i].values, y, options.statistic, options.summary);
      } catch (const DegenerateStatistic&) {
        ok[i] = 0;
      }
    });
    Rational hit = 0, valid = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (!ok[i]) {
        ++result.n_degenerate_draws;
        continue;
      }
      valid += all[i].probability;
      if (std::abs(stat[i]) >= threshold) hit += all[i].probability;
    }
    result.exhaustive = true;
    result.n_draws = static_cast<Index>(all.size());
    result.p_value = to_double(hit / valid);
    return result;
  }

  if (options.draws < 1) throw InputError("the number of draws must be at least 1");
  std::vector<double> stat(static_cast<std::size_t>(options.draws));
  std::vector<Index> redraws(static_cast<std::size_t>(options.draws), 0);
  parallel_for(options.draws, options.threads, [&](Index r) {
    const std::uint64_t base = derive_seed(options.seed, static_cast<std::uint64_t>(r));
    for (Index attempt = 0;; ++attempt) {
      if (attempt > options.max_redraws) {
        throw DegenerateStatistic("too many degenerate draws; the statistic is rarely defined");
      }
      const auto w = d.sample(attempt == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(attempt)));
      try {
        stat[r] = compute_statistic(g, w, y, options.statistic, options.summary);
        redraws[r] = attempt;
        return;
      } catch (const DegenerateStatistic&) {
      }
    }
  });
  Index hits = 0;
  for (Index r = 0; r < options.draws; ++r) {
    if (std::abs(stat[r]) >= threshold) ++hits;
    result.n_degenerate_draws += redraws[r];
  }
  result.n_draws = options.draws;
  result.p_value = static_cast<double>(1 + hits) / static_cast<double>(options.draws + 1);
  return result;
}

}  // namespace bipartite
