#include "bipartite/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bipartite::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

bool looks_numeric(const std::string& s) {
  if (s.empty()) return false;
  const char c = s[0];
  return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
}

Index parse_id(const std::string& text, Index limit, const std::string& source, std::size_t line,
               const char* what) {
  Index v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(source, line, std::string("bad ") + what + " '" + text + "'");
  if (v < 1 || (limit > 0 && v > limit)) {
    fail(source, line, std::string(what) + " " + text + " out of range 1.." +
                           (limit > 0 ? std::to_string(limit) : std::string("inf")));
  }
  return v - 1;
}

double parse_real(const std::string& text, const std::string& source, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(source, line, "bad number '" + text + "'");
  }
}

void require_fields(const CsvRow& row, std::size_t n, const std::string& source) {
  if (row.fields.size() != n) {
    fail(source, row.line, "expected " + std::to_string(n) + " fields, found " + std::to_string(row.fields.size()));
  }
}

// Index of each unit given by id column 0, with every id 1..n present once.
template <class F>
void per_unit_rows(const std::vector<CsvRow>& rows, Index n, const std::string& source, const char* what,
                   F&& body) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
  for (const auto& row : rows) {
    require_fields(row, 2, source);
    const Index i = parse_id(row.fields[0], n, source, row.line, what);
    if (seen[i]) fail(source, row.line, std::string("duplicate ") + what + " " + row.fields[0]);
    seen[i] = 1;
    body(i, row);
  }
  for (Index i = 0; i < n; ++i) {
    if (!seen[i]) throw InputError(source + ": missing " + what + " " + std::to_string(i + 1));
  }
}

Assignment parse_bits(const std::string& bits, const std::string& where) {
  Assignment w;
  for (char c : bits) {
    if (c != '0' && c != '1') throw InputError(where + ": bit string must contain only 0 and 1");
    w.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return w;
}

std::vector<std::string> split_top_level(const std::string& text, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// name(arg, arg) -> name and args; bare names have no args.
std::pair<std::string, std::vector<std::string>> call_form(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos) return {trim(text), {}};
  if (text.back() != ')') throw InputError("unbalanced parentheses in '" + text + "'");
  const auto inner = text.substr(open + 1, text.size() - open - 2);
  return {trim(text.substr(0, open)), inner.empty() ? std::vector<std::string>{} : split_top_level(inner, ',')};
}

}  // namespace

std::vector<CsvRow> read_csv(std::istream& in, const std::string& source,
                             const std::vector<std::string>& header) {
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t number = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++number;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    CsvRow row{number, {}};
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ',')) row.fields.push_back(trim(field));
    if (t.back() == ',') row.fields.emplace_back();
    if (first) {
      first = false;
      if (!looks_numeric(row.fields[0])) {
        std::vector<std::string> got;
        for (const auto& f : row.fields) got.push_back(lower(f));
        if (got != header) {
          std::string want;
          for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
          fail(source, number, "expected header '" + want + "'");
        }
        continue;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

BipartiteGraph read_edges(std::istream& in, const std::string& source, Index n_intervention,
                          Index n_outcome) {
  const auto rows = read_csv(in, source, {"intervention_id", "outcome_id"});
  std::vector<Edge> edges;
  Index max_n = 0;
  Index max_m = 0;
  for (const auto& row : rows) {
    require_fields(row, 2, source);
    const Index n = parse_id(row.fields[0], n_intervention, source, row.line, "intervention_id");
    const Index m = parse_id(row.fields[1], n_outcome, source, row.line, "outcome_id");
    max_n = std::max(max_n, n + 1);
    max_m = std::max(max_m, m + 1);
    edges.emplace_back(n, m);
  }
  if (n_intervention == 0) n_intervention = max_n;
  if (n_outcome == 0) n_outcome = max_m;
  if (n_intervention == 0 || n_outcome == 0) throw InputError(source + ": no edges");
  return BipartiteGraph(n_intervention, n_outcome, edges);
}

BipartiteGraph load_edges(const std::filesystem::path& path, Index n_intervention, Index n_outcome) {
  auto in = open(path);
  return read_edges(in, path.string(), n_intervention, n_outcome);
}

void write_edges(std::ostream& out, const BipartiteGraph& g) {
  out << "intervention_id,outcome_id\n";
  for (Index n = 0; n < g.n_intervention(); ++n) {
    for (Index m : g.outcome_set(n)) out << n + 1 << ',' << m + 1 << '\n';
  }
}

Assignment read_treatment(std::istream& in, const std::string& source, Index n) {
  const auto rows = read_csv(in, source, {"intervention_id", "w"});
  Assignment w(static_cast<std::size_t>(n), 0);
  per_unit_rows(rows, n, source, "intervention_id", [&](Index i, const CsvRow& row) {
    const auto& v = row.fields[1];
    if (v != "0" && v != "1") fail(source, row.line, "treatment must be 0 or 1");
    w[i] = static_cast<std::uint8_t>(v[0] - '0');
  });
  return w;
}

Assignment load_treatment(const std::filesystem::path& path, Index n) {
  auto in = open(path);
  return read_treatment(in, path.string(), n);
}

void write_treatment(std::ostream& out, std::span<const std::uint8_t> w) {
  out << "intervention_id,w\n";
  for (std::size_t i = 0; i < w.size(); ++i) out << i + 1 << ',' << int(w[i]) << '\n';
}

Vector read_outcomes(std::istream& in, const std::string& source, Index m) {
  const auto rows = read_csv(in, source, {"outcome_id", "y"});
  Vector y(m);
  per_unit_rows(rows, m, source, "outcome_id",
                [&](Index i, const CsvRow& row) { y[i] = parse_real(row.fields[1], source, row.line); });
  return y;
}

Vector load_outcomes(const std::filesystem::path& path, Index m) {
  auto in = open(path);
  return read_outcomes(in, path.string(), m);
}

void write_outcomes(std::ostream& out, const Vector& y) {
  out << "outcome_id,y\n" << std::setprecision(17);
  for (Index i = 0; i < y.size(); ++i) out << i + 1 << ',' << y[i] << '\n';
}

Strata read_strata(std::istream& in, const std::string& source, Index n) {
  const auto rows = read_csv(in, source, {"intervention_id", "stratum_id"});
  Strata s;
  s.stratum_of_unit.assign(static_cast<std::size_t>(n), 0);
  std::map<std::string, Index> index;
  per_unit_rows(rows, n, source, "intervention_id", [&](Index i, const CsvRow& row) {
    const auto& label = row.fields[1];
    if (label.empty()) fail(source, row.line, "empty stratum id");
    auto it = index.find(label);
    if (it == index.end()) {
      it = index.emplace(label, static_cast<Index>(s.labels.size())).first;
      s.labels.push_back(label);
    }
    s.stratum_of_unit[i] = it->second;
  });
  return s;
}

Strata load_strata(const std::filesystem::path& path, Index n) {
  auto in = open(path);
  return read_strata(in, path.string(), n);
}

PotentialOutcomeTable read_po_table(std::istream& in, const std::string& source, const BipartiteGraph& g) {
  const auto rows = read_csv(in, source, {"outcome_id", "local_vector_bits", "y"});
  std::vector<std::vector<double>> values(static_cast<std::size_t>(g.n_outcome()));
  std::vector<std::vector<std::uint8_t>> seen(values.size());
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto bits = g.intervention_set_size(m);
    if (bits > kDefaultEnumerationCap) throw EnumerationCapExceeded("potential-outcome table too large");
    values[m].assign(std::size_t{1} << bits, 0.0);
    seen[m].assign(std::size_t{1} << bits, 0);
  }
  for (const auto& row : rows) {
    require_fields(row, 3, source);
    const Index m = parse_id(row.fields[0], g.n_outcome(), source, row.line, "outcome_id");
    const auto& bits = row.fields[1];
    // An isolated unit's only local vector is the empty string.
    if (bits.size() != g.intervention_set_size(m)) {
      fail(source, row.line, "expected " + std::to_string(g.intervention_set_size(m)) + " bits for outcome " +
                                 row.fields[0]);
    }
    LocalMask mask = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != '0' && bits[i] != '1') fail(source, row.line, "bits must be 0 or 1");
      if (bits[i] == '1') mask |= LocalMask{1} << i;
    }
    if (seen[m][mask]) fail(source, row.line, "duplicate local vector");
    seen[m][mask] = 1;
    values[m][mask] = parse_real(row.fields[2], source, row.line);
  }
  for (Index m = 0; m < g.n_outcome(); ++m) {
    if (std::find(seen[m].begin(), seen[m].end(), 0) != seen[m].end()) {
      throw InputError(source + ": outcome " + std::to_string(m + 1) + " is missing local vectors");
    }
  }
  return PotentialOutcomeTable(g, std::move(values));
}

PotentialOutcomeTable load_po_table(const std::filesystem::path& path, const BipartiteGraph& g) {
  auto in = open(path);
  return read_po_table(in, path.string(), g);
}

void write_po_table(std::ostream& out, const BipartiteGraph& g, const PotentialOutcomeTable& po) {
  out << "outcome_id,local_vector_bits,y\n" << std::setprecision(17);
  for (Index m = 0; m < g.n_outcome(); ++m) {
    const auto bits = g.intervention_set_size(m);
    for (LocalMask v = 0; v < (LocalMask{1} << bits); ++v) {
      out << m + 1 << ',';
      for (std::size_t i = 0; i < bits; ++i) out << ((v >> i) & 1U);
      out << ',' << po.value(m, v) << '\n';
    }
  }
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw InputError(source + ": missing key '" + key + "'");
  return it->second;
}

Config parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir) {
  Config c;
  c.source = source;
  c.base_dir = base_dir;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const auto t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(source, number, "expected key = value");
    const auto key = trim(t.substr(0, eq));
    if (key.empty()) fail(source, number, "empty key");
    if (c.values.count(key)) fail(source, number, "duplicate key '" + key + "'");
    c.values[key] = trim(t.substr(eq + 1));
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  auto in = open(path);
  return parse_config(in, path.string(), path.parent_path());
}

Config parse_inline_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::string lines = text;
  std::replace(lines.begin(), lines.end(), ',', '\n');
  std::istringstream in(lines);
  return parse_config(in, "inline config", base_dir);
}

namespace {

std::filesystem::path resolve(const Config& c, const std::string& key) {
  std::filesystem::path p = c.get(key);
  return p.is_relative() ? c.base_dir / p : p;
}

Rational config_rational(const Config& c, const std::string& key) {
  try {
    return parse_rational(c.get(key));
  } catch (const InputError& e) {
    throw InputError(c.source + ": key '" + key + "': " + e.what());
  }
}

Index config_count(const Config& c, const std::string& key) {
  const auto& text = c.get(key);
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError(c.source + ": key '" + key + "' must be an integer");
  }
  return v;
}

Strata config_strata(const Config& c, Index n) {
  if (c.has("strata_file")) return load_strata(resolve(c, "strata_file"), n);
  if (c.has("strata")) {
    // Inline labels, one per unit, separated by spaces or semicolons.
    std::string text = c.get("strata");
    std::replace(text.begin(), text.end(), ';', ' ');
    std::istringstream in(text);
    std::ostringstream csv;
    std::string label;
    Index i = 0;
    while (in >> label) csv << ++i << ',' << label << '\n';
    std::istringstream rows(csv.str());
    return read_strata(rows, c.source + " (strata)", n);
  }
  throw InputError(c.source + ": stratified designs need strata_file or strata");
}

}  // namespace

Design design_from_config(const Config& c, Index n_units) {
  const auto kind = c.get("kind");
  if (c.has("n_units") && config_count(c, "n_units") != n_units) {
    throw InputError(c.source + ": n_units = " + c.get("n_units") + " but the graph has " +
                     std::to_string(n_units) + " intervention units");
  }
  if (kind == "bernoulli") return Design::bernoulli(n_units, config_rational(c, "p"));
  if (kind == "crd") return Design::crd(n_units, config_count(c, "n_treated"));
  if (kind == "stratified_bernoulli" || kind == "stratified_crd") {
    const auto strata = config_strata(c, n_units);
    if (kind == "stratified_bernoulli") {
      std::vector<Rational> p;
      for (const auto& label : strata.labels) p.push_back(config_rational(c, "p." + label));
      return Design::stratified_bernoulli(strata.stratum_of_unit, std::move(p));
    }
    std::vector<Index> treated;
    for (const auto& label : strata.labels) treated.push_back(config_count(c, "n_treated." + label));
    return Design::stratified_crd(strata.stratum_of_unit, std::move(treated));
  }
  if (kind == "point_mass") {
    const auto w = parse_bits(c.get("w"), c.source);
    if (static_cast<Index>(w.size()) != n_units) throw InputError(c.source + ": w has the wrong length");
    return Design::point_mass(w);
  }
  if (kind == "tabulated") {
    const auto path = resolve(c, "table_file");
    auto in = open(path);
    const auto rows = read_csv(in, path.string(), {"w_bits", "probability"});
    std::vector<WeightedAssignment> support;
    for (const auto& row : rows) {
      require_fields(row, 2, path.string());
      WeightedAssignment a;
      a.values = parse_bits(row.fields[0], path.string() + ":" + std::to_string(row.line));
      try {
        a.probability = parse_rational(row.fields[1]);
      } catch (const InputError& e) {
        fail(path.string(), row.line, e.what());
      }
      support.push_back(std::move(a));
    }
    return Design::tabulated(n_units, std::move(support));
  }
  throw InputError(c.source + ": unknown design kind '" + kind + "'");
}

std::shared_ptr<const LocalPolicy> parse_policy(const std::string& text, const BipartiteGraph& g,
                                                const Design& d) {
  const auto [name, args] = call_form(text);
  const auto need = [&, &name = name, &args = args](std::size_t n) {
    if (args.size() != n) {
      throw InputError("policy '" + name + "' takes " + std::to_string(n) + " argument(s)");
    }
  };
  if (name == "bernoulli") {
    need(1);
    return std::make_shared<LocalPolicy>(LocalPolicy::bernoulli(g, parse_rational(args[0])));
  }
  if (name == "arm") {
    need(1);
    if (args[0] != "0" && args[0] != "1") throw InputError("arm must be 0 or 1");
    return std::make_shared<LocalPolicy>(LocalPolicy::constant_arm(g, args[0] == "1"));
  }
  if (name == "implied") {
    need(0);
    return std::make_shared<LocalPolicy>(LocalPolicy::implied(g, d));
  }
  if (name == "key") {
    need(2);
    if (args[0] != "0" && args[0] != "1") throw InputError("key arm must be 0 or 1");
    std::vector<Index> keys;
    for (Index m = 0; m < g.n_outcome(); ++m) {
      keys.push_back(g.intervention_set_size(m) ? g.intervention_set(m).front() : 0);
    }
    return std::make_shared<LocalPolicy>(
        LocalPolicy::key_associated(g, keys, args[0] == "1", parse_rational(args[1])));
  }
  if (name == "shift") {
    need(1);
    Index k = 0;
    const auto [ptr, ec] = std::from_chars(args[0].data(), args[0].data() + args[0].size(), k);
    if (ec != std::errc() || ptr != args[0].data() + args[0].size()) throw InputError("shift needs an integer");
    return std::make_shared<LocalPolicy>(LocalPolicy::implied(g, shift_treated(d, k)));
  }
  if (name == "halfcontrols") {
    need(0);
    return std::make_shared<LocalPolicy>(LocalPolicy::implied(g, treat_half_controls(d)));
  }
  if (name == "exposure") {
    need(2);
    ExposureFunction f;
    if (args[0] == "count") {
      f = ExposureFunction::count_treated;
    } else if (args[0] == "proportion") {
      f = ExposureFunction::proportion_treated;
    } else {
      throw InputError("exposure function must be count or proportion");
    }
    const auto e = parse_rational(args[1]);
    std::vector<local::Entry> entries;
    for (Index m = 0; m < g.n_outcome(); ++m) entries.emplace_back(target_exposure_policy(g, g, f, m, e));
    return std::make_shared<LocalPolicy>(g, std::move(entries), "exposure(" + args[0] + "," + e.get_str() + ")");
  }
  throw InputError("unknown policy '" + text + "'");
}

EstimandSpec parse_estimand(const std::string& raw, const BipartiteGraph& g, const Design& d) {
  const auto text = trim(raw);
  if (text == "mean0") return EstimandSpec::mean_po(0);
  if (text == "mean1") return EstimandSpec::mean_po(1);
  if (text == "aon") return EstimandSpec::all_or_none();
  if (text == "sq1") return EstimandSpec::status_quo_vs_none();
  if (text == "sq0") return EstimandSpec::all_vs_status_quo();
  if (text.rfind("plus_", 0) == 0) {
    Index k = 0;
    const auto digits = text.substr(5);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) throw InputError("bad +K estimand '" + text + "'");
    return EstimandSpec::plus_k(k);
  }
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const auto head = text.substr(0, colon);
    const auto body = text.substr(colon + 1);
    if (head == "stoch") return EstimandSpec::stochastic(parse_policy(body, g, d));
    if (head == "stoch_sq") return EstimandSpec::stochastic_vs_observed(parse_policy(body, g, d));
    if (head == "contrast") {
      const auto parts = split_top_level(body, ',');
      if (parts.size() != 2) throw InputError("contrast needs two policies");
      return EstimandSpec::stochastic_contrast(parse_policy(parts[0], g, d), parse_policy(parts[1], g, d));
    }
  }
  throw InputError("unknown estimand '" + text + "'");
}

std::string format6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.string(), fnv1a_file(path));
}

RunManifest make_manifest(std::string command, std::string design, std::uint64_t seed) {
  RunManifest m;
  m.tool_version = "0.1.0";
  m.command = std::move(command);
  m.design = std::move(design);
  m.seed = seed;
  // SOURCE_DATE_EPOCH pins the timestamp so reruns can be byte-identical.
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::atoll(epoch));
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  m.timestamp = buf;
  return m;
}

Json to_json(const GraphStats& s) {
  return Json{{"density_pct", s.density_pct},
              {"avg_intervention_set_size", s.avg_intervention_set_size},
              {"avg_outcome_set_size", s.avg_outcome_set_size},
              {"d_o", s.max_intervention_set_size},
              {"d_I", s.max_outcome_set_size},
              {"d_kappa", s.max_pairwise_overlap},
              {"kappa", s.n_overlapping_pairs},
              {"n_isolated_outcomes", s.n_isolated_outcomes},
              {"pct_outcomes_single_parent", s.pct_outcomes_single_parent},
              {"pct_interventions_two_outcomes", s.pct_interventions_two_outcomes}};
}

Json to_json(const GraphClassification& c) {
  Json comps = Json::array();
  for (const auto& comp : c.components) {
    Json a = Json::array();
    Json b = Json::array();
    for (Index n : comp.intervention_units) a.push_back(n + 1);
    for (Index m : comp.outcome_units) b.push_back(m + 1);
    comps.push_back(Json{{"intervention_units", a}, {"outcome_units", b}});
  }
  return Json{{"class", to_string(c.kind)}, {"components", comps}};
}

Json to_json(const PositivityReport& r) {
  Json excluded = Json::array();
  for (const auto& v : r.excluded) excluded.push_back(Json{{"unit", v.unit + 1}, {"condition", v.condition}});
  Json retained = Json::array();
  for (Index m : r.retained) retained.push_back(m + 1);
  return Json{{"estimand", r.estimand_id}, {"excluded", excluded}, {"retained", retained}};
}

PositivityReport positivity_from_json(const Json& j) {
  PositivityReport r;
  r.estimand_id = j.at("estimand").get<std::string>();
  for (const auto& v : j.at("excluded")) {
    r.excluded.push_back({v.at("unit").get<Index>() - 1, v.at("condition").get<std::string>()});
  }
  for (const auto& m : j.at("retained")) r.retained.push_back(m.get<Index>() - 1);
  return r;
}

Json to_json(const EstimateReport& r) {
  Json j{{"estimand", r.estimand_id},
         {"estimate", r.point_estimate},
         {"n_retained", r.n_retained},
         {"n_excluded", r.n_excluded},
         {"effective_units", r.effective_units}};
  j["variance_bound"] = r.variance_bound ? Json(*r.variance_bound) : Json(nullptr);
  j["standard_error"] = r.standard_error() ? Json(*r.standard_error()) : Json(nullptr);
  return j;
}

EstimateReport estimate_from_json(const Json& j) {
  EstimateReport r;
  r.estimand_id = j.at("estimand").get<std::string>();
  r.point_estimate = j.at("estimate").get<double>();
  if (!j.at("variance_bound").is_null()) r.variance_bound = j.at("variance_bound").get<double>();
  r.n_retained = j.at("n_retained").get<Index>();
  r.n_excluded = j.at("n_excluded").get<Index>();
  r.effective_units = j.at("effective_units").get<Index>();
  return r;
}

Json to_json(const TestResult& r) {
  return Json{{"statistic", r.statistic_id},      {"t_observed", r.t_observed},
              {"n_draws", r.n_draws},             {"p_value", r.p_value},
              {"n_degenerate_draws", r.n_degenerate_draws}, {"exhaustive", r.exhaustive}};
}

TestResult test_result_from_json(const Json& j) {
  TestResult r;
  r.statistic_id = j.at("statistic").get<std::string>();
  r.t_observed = j.at("t_observed").get<double>();
  r.n_draws = j.at("n_draws").get<Index>();
  r.p_value = j.at("p_value").get<double>();
  r.n_degenerate_draws = j.at("n_degenerate_draws").get<Index>();
  r.exhaustive = j.at("exhaustive").get<bool>();
  return r;
}

Json to_json(const ConsistencyStats& s) {
  const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"gamma", opt(s.gamma)},   {"gamma_star", opt(s.gamma_star)}, {"Delta", opt(s.Delta)},
              {"Gamma_star", opt(s.Gamma_star)}, {"kappa", s.kappa}, {"d_o", s.d_o},
              {"d_kappa", s.d_kappa},    {"n_units", s.n_units}};
}

Json to_json(const RunManifest& m) {
  Json inputs = Json::array();
  for (const auto& [path, hash] : m.inputs) inputs.push_back(Json{{"path", path}, {"fnv1a64", hash}});
  return Json{{"tool_version", m.tool_version}, {"command", m.command}, {"inputs", inputs},
              {"design", m.design},             {"seed", m.seed},       {"timestamp", m.timestamp}};
}

}  // namespace bipartite::io
