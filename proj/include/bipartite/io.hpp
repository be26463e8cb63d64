#ifndef BIPARTITE_IO_HPP
#define BIPARTITE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bipartite/design.hpp"
#include "bipartite/estimand.hpp"
#include "bipartite/estimators.hpp"
#include "bipartite/potential_outcomes.hpp"
#include "bipartite/randtest.hpp"
#include "bipartite/variance.hpp"

namespace bipartite::io {

using Json = nlohmann::json;

// Every file uses 1-based ids. Parse errors are InputError with
// "source:line: message".

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Comma-separated rows with blank and '#' lines skipped. A leading row equal
/// to `header` is dropped; any other non-numeric first row is an error.
std::vector<CsvRow> read_csv(std::istream& in, const std::string& source,
                             const std::vector<std::string>& header);

/// `intervention_id,outcome_id`. Dimensions default to the largest ids seen.
BipartiteGraph read_edges(std::istream& in, const std::string& source, Index n_intervention = 0,
                          Index n_outcome = 0);
BipartiteGraph load_edges(const std::filesystem::path& path, Index n_intervention = 0,
                          Index n_outcome = 0);
void write_edges(std::ostream& out, const BipartiteGraph& g);

/// `intervention_id,w`, one row per unit.
Assignment read_treatment(std::istream& in, const std::string& source, Index n);
Assignment load_treatment(const std::filesystem::path& path, Index n);
void write_treatment(std::ostream& out, std::span<const std::uint8_t> w);

/// `outcome_id,y`, one row per unit.
Vector read_outcomes(std::istream& in, const std::string& source, Index m);
Vector load_outcomes(const std::filesystem::path& path, Index m);
void write_outcomes(std::ostream& out, const Vector& y);

struct Strata {
  std::vector<Index> stratum_of_unit;  // 0-based stratum index per unit
  std::vector<std::string> labels;     // label of each stratum index
};

/// `intervention_id,stratum_id`; stratum labels are arbitrary strings,
/// numbered in order of first appearance.
Strata read_strata(std::istream& in, const std::string& source, Index n);
Strata load_strata(const std::filesystem::path& path, Index n);

/// `outcome_id,local_vector_bits,y`; bits follow ascending intervention id
/// within the outcome unit's set.
PotentialOutcomeTable read_po_table(std::istream& in, const std::string& source, const BipartiteGraph& g);
PotentialOutcomeTable load_po_table(const std::filesystem::path& path, const BipartiteGraph& g);
void write_po_table(std::ostream& out, const BipartiteGraph& g, const PotentialOutcomeTable& po);

/// `key = value` lines; '#' starts a comment.
struct Config {
  std::map<std::string, std::string> values;
  std::filesystem::path base_dir;
  std::string source;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& get(const std::string& key) const;
};

Config parse_config(std::istream& in, const std::string& source,
                    const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);
/// Comma-separated `key=value` pairs, for command lines and study specs.
Config parse_inline_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Keys: kind (bernoulli, crd, stratified_bernoulli, stratified_crd,
/// point_mass, tabulated), n_units, p, n_treated, strata_file, p.<label>,
/// n_treated.<label>, w (bit string), table_file (`w_bits,probability`).
/// n_units, when given, must equal the graph's intervention count.
Design design_from_config(const Config& config, Index n_units);

/// Policies: bernoulli(x), arm(a), implied, key(a,p) with the lowest-id unit
/// of each set as key, shift(k), halfcontrols, exposure(count|proportion,e).
std::shared_ptr<const LocalPolicy> parse_policy(const std::string& text, const BipartiteGraph& g,
                                                const Design& d);

/// Estimands: mean0, mean1, aon, sq1, sq0, plus_K, stoch:P, stoch_sq:P,
/// contrast:P,P' (the second policy is the alternative).
EstimandSpec parse_estimand(const std::string& text, const BipartiteGraph& g, const Design& d);

/// Six significant digits, as printed in report tables.
std::string format6(double x);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string fnv1a_file(const std::filesystem::path& path);

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, hash
  std::string design;
  std::uint64_t seed = 0;
  std::string timestamp;

  void add_input(const std::filesystem::path& path);
};

RunManifest make_manifest(std::string command, std::string design, std::uint64_t seed);

Json to_json(const GraphStats& s);
Json to_json(const GraphClassification& c);
Json to_json(const PositivityReport& r);
Json to_json(const EstimateReport& r);
Json to_json(const TestResult& r);
Json to_json(const ConsistencyStats& s);
Json to_json(const RunManifest& m);

PositivityReport positivity_from_json(const Json& j);
EstimateReport estimate_from_json(const Json& j);
TestResult test_result_from_json(const Json& j);

}  // namespace bipartite::io

#endif  // BIPARTITE_IO_HPP
