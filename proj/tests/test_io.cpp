#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bipartite/io.hpp"
#include "bipartite/oracle.hpp"
#include "support.hpp"

using namespace bipartite;
namespace fs = std::filesystem;

namespace {

Rational q(long a, long b) {
  Rational r(a, b);
  r.canonicalize();
  return r;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "bipartite_io_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("edge files round trip and dimensions default to the largest ids") {
  const auto g = fixtures::three_lines();
  std::stringstream out;
  io::write_edges(out, g);
  const auto back = io::read_edges(out, "three_lines.csv");
  CHECK(back.n_intervention() == 3);
  CHECK(back.n_outcome() == 8);
  CHECK(back.edges() == g.edges());

  std::istringstream no_header("1,1\n# comment\n\n2,2\n");
  const auto id = io::read_edges(no_header, "id.csv");
  CHECK(classify_graph(id).kind == GraphClass::one_to_one);

  std::istringstream isolated("1,1\n", std::ios::in);
  CHECK(io::read_edges(isolated, "x", 2, 3).isolated_outcomes() == std::vector<Index>{1, 2});
}

TEST_CASE("malformed edge rows name the line") {
  std::istringstream bad("intervention_id,outcome_id\n1,2\n1;3\n");
  CHECK(error_of([&] { io::read_edges(bad, "g.csv"); }).find("g.csv:3:") == 0);

  std::istringstream zero("0,1\n");
  CHECK(error_of([&] { io::read_edges(zero, "g.csv"); }).find("g.csv:1:") == 0);

  std::istringstream range("1,1\n4,1\n");
  CHECK(error_of([&] { io::read_edges(range, "g.csv", 3); }).find("g.csv:2:") == 0);

  std::istringstream header("from,to\n1,1\n");
  CHECK(error_of([&] { io::read_edges(header, "g.csv"); }).find("g.csv:1: expected header") == 0);

  CHECK_THROWS_AS(io::load_edges(scratch_dir() / "missing.csv"), InputError);
}

TEST_CASE("treatment and outcome files round trip") {
  const Assignment w{1, 0, 1};
  std::stringstream ws;
  io::write_treatment(ws, w);
  CHECK(io::read_treatment(ws, "w.csv", 3) == w);

  Vector y(4);
  y << 1.5, -2.0, 0.1, 1e-300;
  std::stringstream ys;
  io::write_outcomes(ys, y);
  CHECK(io::read_outcomes(ys, "y.csv", 4) == y);

  std::istringstream missing("intervention_id,w\n1,1\n3,0\n");
  CHECK(error_of([&] { io::read_treatment(missing, "w.csv", 3); }).find("missing intervention_id 2") !=
        std::string::npos);
  std::istringstream dup("1,1\n1,0\n2,0\n");
  CHECK(error_of([&] { io::read_treatment(dup, "w.csv", 2); }).find("w.csv:2:") == 0);
  std::istringstream two("1,2\n");
  CHECK(error_of([&] { io::read_treatment(two, "w.csv", 1); }).find("w.csv:1:") == 0);
  std::istringstream nan("1,abc\n");
  CHECK(error_of([&] { io::read_outcomes(nan, "y.csv", 1); }).find("y.csv:1: bad number") == 0);
}

TEST_CASE("potential-outcome tables round trip") {
  const auto g = fixtures::three_lines();
  const auto po = make_outcome_table(g, OutcomeFamily::interaction, 7);
  std::stringstream s;
  io::write_po_table(s, g, po);
  const auto back = io::read_po_table(s, "po.csv", g);
  for (Index m = 0; m < g.n_outcome(); ++m) {
    for (LocalMask v = 0; v < (LocalMask{1} << g.intervention_set_size(m)); ++v) {
      CHECK(back.value(m, v) == po.value(m, v));
    }
  }

  std::istringstream short_bits("outcome_id,local_vector_bits,y\n4,1,2.0\n");
  CHECK(error_of([&] { io::read_po_table(short_bits, "po.csv", g); }).find("po.csv:2: expected 2 bits") == 0);
}

TEST_CASE("config files and design construction") {
  std::istringstream text("# design\nkind = crd\nn_treated = 2  # two of three\n");
  const auto c = io::parse_config(text, "d.cfg", ".");
  const auto d = io::design_from_config(c, 3);
  CHECK(d.kind() == DesignKind::crd);
  CHECK(d.fixed_treated_count() == 2);

  const auto b = io::design_from_config(io::parse_inline_config("kind=bernoulli,p=25/52"), 10);
  CHECK(b.stratum_probabilities()[0] == q(25, 52));

  const auto pm = io::design_from_config(io::parse_inline_config("kind=point_mass,w=101"), 3);
  CHECK(pm.point() == Assignment{1, 0, 1});

  const auto strata = write_file("strata.csv", "intervention_id,stratum_id\n1,a\n2,b\n3,a\n4,b\n");
  std::istringstream strat("kind = stratified_crd\nstrata_file = strata.csv\nn_treated.a = 1\nn_treated.b = 2\n");
  const auto sc = io::design_from_config(io::parse_config(strat, "s.cfg", scratch_dir()), 4);
  CHECK(sc.kind() == DesignKind::stratified_crd);
  CHECK(sc.fixed_treated_count() == 3);
  CHECK(sc.stratum_of_unit()[2] == 0);

  const auto sb = io::design_from_config(
      io::parse_inline_config("kind=stratified_bernoulli,strata=x y x,p.x=1,p.y=1/3"), 3);
  CHECK(sb.stratum_probabilities()[1] == q(1, 3));

  write_file("table.csv", "w_bits,probability\n10,1/4\n01,3/4\n");
  const auto tab = io::design_from_config(
      io::parse_inline_config("kind=tabulated,table_file=table.csv", scratch_dir()), 2);
  CHECK(tab.probability_of(Assignment{0, 1}) == q(3, 4));

  CHECK_THROWS_AS(io::design_from_config(io::parse_inline_config("kind=magic"), 3), InputError);
  CHECK(error_of([] { io::design_from_config(io::parse_inline_config("kind=crd"), 3); })
            .find("missing key 'n_treated'") != std::string::npos);
  CHECK_THROWS_AS(io::design_from_config(io::parse_inline_config("kind=crd,n_units=4,n_treated=1"), 3),
                  InputError);
  std::istringstream dup("kind=crd\nkind=bernoulli\n");
  CHECK(error_of([&] { io::parse_config(dup, "d.cfg", "."); }).find("d.cfg:2:") == 0);
}

TEST_CASE("estimand grammar") {
  const auto g = fixtures::three_lines();
  const auto d = Design::crd(3, 1);
  CHECK(io::parse_estimand("aon", g, d).kind == EstimandKind::all_or_none);
  CHECK(io::parse_estimand(" mean1 ", g, d).arm == 1);
  CHECK(io::parse_estimand("sq1", g, d).kind == EstimandKind::status_quo_vs_none);
  CHECK(io::parse_estimand("sq0", g, d).kind == EstimandKind::all_vs_status_quo);
  CHECK(io::parse_estimand("plus_2", g, d).k == 2);
  CHECK(io::parse_estimand("stoch:bernoulli(1/2)", g, d).kind == EstimandKind::stochastic);
  CHECK(io::parse_estimand("stoch_sq:shift(1)", g, d).kind == EstimandKind::stochastic_vs_observed);

  const auto contrast = io::parse_estimand("contrast:bernoulli(1/3),key(1,1/2)", g, d);
  REQUIRE(contrast.kind == EstimandKind::stochastic_contrast);
  // Unit 4 is linked to interventions 1 and 2; the key is intervention 1.
  CHECK(contrast.h_prime->prob(3, Assignment{1, 1}) == q(1, 2));
  CHECK(contrast.h_prime->prob(3, Assignment{0, 1}) == 0);
  CHECK(contrast.h->prob(3, Assignment{1, 1}) == q(1, 9));

  const auto arm = io::parse_policy("arm(1)", g, d);
  CHECK(arm->prob(0, Assignment{1}) == 1);

  const auto exposure = io::parse_policy("exposure(count,1)", g, d);
  const auto direct = target_exposure_policy(g, g, ExposureFunction::count_treated, 3, 1);
  CHECK(exposure->table(3) == direct.probabilities);

  const auto implied = io::parse_policy("implied", g, d);
  CHECK(implied->prob(3, Assignment{1, 1}) == 0);

  for (const char* bad : {"aon2", "plus_x", "stoch:magic(1)", "contrast:arm(1)", "stoch:arm(2)",
                          "stoch:bernoulli(1/2", "stoch:bernoulli()"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(io::parse_estimand(bad, g, d), InputError);
  }
}

TEST_CASE("shifted designs move treated counts and probabilities") {
  // Intervention units linked to a single outcome unit: 25 treated of 52.
  std::vector<Index> strata(60, 1);
  std::fill(strata.begin(), strata.begin() + 52, 0);
  const auto crd = Design::stratified_crd(strata, {25, 3});
  const auto plus_one = shift_treated(crd, 1);
  CHECK(plus_one.stratum_treated()[0] == 26);
  CHECK(plus_one.stratum_treated()[1] == 4);
  const auto capped = shift_treated(crd, 10);
  CHECK(capped.stratum_treated()[1] == 8);
  const auto half = treat_half_controls(crd);
  CHECK(half.stratum_treated()[0] == 25 + 13);
  CHECK(half.stratum_treated()[1] == 3 + 2);

  const auto bern = Design::stratified_bernoulli(strata, {q(25, 52), q(3, 8)});
  CHECK(shift_treated(bern, 1).stratum_probabilities()[0] == q(26, 52));
  CHECK(shift_treated(bern, 1).stratum_probabilities()[1] == q(4, 8));
  CHECK(treat_half_controls(bern).stratum_probabilities()[0] == q(38, 52));
  CHECK(shift_treated(Design::bernoulli(4, q(7, 8)), 3).stratum_probabilities()[0] == 1);

  CHECK_THROWS_AS(shift_treated(Design::point_mass({1, 0}), 1), InputError);
}

TEST_CASE("reports round trip through JSON") {
  const auto g = fixtures::three_lines();
  const auto d = Design::crd(3, 2);
  const auto rep = screen_positivity(g, d, EstimandSpec::all_or_none());
  const auto rep_back = io::positivity_from_json(io::Json::parse(io::to_json(rep).dump()));
  CHECK(rep_back.estimand_id == rep.estimand_id);
  CHECK(rep_back.retained == rep.retained);
  REQUIRE(rep_back.excluded.size() == rep.excluded.size());
  for (std::size_t i = 0; i < rep.excluded.size(); ++i) {
    CHECK(rep_back.excluded[i].unit == rep.excluded[i].unit);
    CHECK(rep_back.excluded[i].condition == rep.excluded[i].condition);
  }

  EstimateReport est{"aon", -2.0 / 3.0, 0.1 + 0.2, 5, 3, 4};
  const auto est_back = io::estimate_from_json(io::Json::parse(io::to_json(est).dump()));
  CHECK(est_back.point_estimate == est.point_estimate);
  CHECK(est_back.variance_bound == est.variance_bound);
  CHECK(est_back.effective_units == 4);
  est.variance_bound.reset();
  CHECK_FALSE(io::estimate_from_json(io::to_json(est)).variance_bound);

  TestResult tr{"ols_total_experience", 0.123456789012345678, 500, 0.0419, 2, false};
  const auto tr_back = io::test_result_from_json(io::Json::parse(io::to_json(tr).dump()));
  CHECK(tr_back.t_observed == tr.t_observed);
  CHECK(tr_back.p_value == tr.p_value);
  CHECK(tr_back.n_degenerate_draws == 2);

  const auto stats = io::to_json(graph_stats(g));
  CHECK(stats.at("d_o") == 2);
}

TEST_CASE("hashing and number formatting") {
  CHECK(io::fnv1a_file(write_file("empty.txt", "")) == "cbf29ce484222325");
  CHECK(io::fnv1a_file(write_file("a.txt", "a")) == "af63dc4c8601ec8c");
  CHECK(io::format6(1.0 / 3.0) == "0.333333");
  CHECK(io::format6(1234567.0) == "1.23457e+06");

  auto m = io::make_manifest("estimate", "crd(3,2)", 42);
  m.add_input(scratch_dir() / "a.txt");
  const auto j = io::to_json(m);
  CHECK(j.at("seed") == 42);
  CHECK(j.at("inputs")[0].at("fnv1a64") == "af63dc4c8601ec8c");
}
