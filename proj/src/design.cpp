#include "bipartite/design.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace bipartite {

std::string to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::bernoulli: return "bernoulli";
    case DesignKind::stratified_bernoulli: return "stratified_bernoulli";
    case DesignKind::crd: return "crd";
    case DesignKind::stratified_crd: return "stratified_crd";
    case DesignKind::point_mass: return "point_mass";
    case DesignKind::tabulated: return "tabulated";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<Index> count_strata(std::span<const Index> stratum_of_unit, Index& n_strata) {
  if (stratum_of_unit.empty()) throw InputError("design needs at least one unit");
  n_strata = 0;
  for (Index s : stratum_of_unit) {
    if (s < 0) throw InputError("negative stratum id");
    n_strata = std::max(n_strata, s + 1);
  }
  std::vector<Index> sizes(static_cast<std::size_t>(n_strata), 0);
  for (Index s : stratum_of_unit) ++sizes[s];
  for (Index s = 0; s < n_strata; ++s) {
    if (sizes[s] == 0) throw InputError("stratum " + std::to_string(s + 1) + " has no units");
  }
  return sizes;
}

bool strictly_increasing(std::span<const Index> subset) {
  for (std::size_t i = 1; i < subset.size(); ++i) {
    if (subset[i] <= subset[i - 1]) return false;
  }
  return true;
}

// Sorted copy of a constraint list; nullopt when a unit repeats with
// different values.
struct SortedConstraint {
  std::vector<Index> units;
  Assignment values;
};

std::optional<SortedConstraint> sort_constraint(std::span<const Index> subset,
                                                std::span<const std::uint8_t> values) {
  std::vector<std::size_t> order(subset.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return subset[a] < subset[b];
  });
  SortedConstraint out;
  for (std::size_t idx : order) {
    if (!out.units.empty() && out.units.back() == subset[idx]) {
      if (out.values.back() != values[idx]) return std::nullopt;
      continue;
    }
    out.units.push_back(subset[idx]);
    out.values.push_back(values[idx]);
  }
  return out;
}

Rational pow_rational(const Rational& base, Index exponent) {
  Rational result = 1;
  for (Index i = 0; i < exponent; ++i) result *= base;
  return result;
}

}  // namespace

Rational parse_rational(const std::string& raw) {
  std::string text = raw;
  text.erase(std::remove_if(text.begin(), text.end(), ::isspace), text.end());
  if (text.empty()) throw InputError("empty number");
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw InputError("zero denominator in '" + raw + "'");
    Rational q = num / den;
    q.canonicalize();
    return q;
  }
  std::string mantissa = text;
  long exponent = 0;
  const auto e = text.find_first_of("eE");
  if (e != std::string::npos) {
    mantissa = text.substr(0, e);
    try {
      std::size_t used = 0;
      exponent = std::stol(text.substr(e + 1), &used);
      if (used != text.size() - e - 1) throw InputError("bad exponent");
    } catch (const std::exception&) {
      throw InputError("cannot parse number '" + raw + "'");
    }
  }
  bool negative = false;
  std::size_t pos = 0;
  if (!mantissa.empty() && (mantissa[0] == '-' || mantissa[0] == '+')) {
    negative = mantissa[0] == '-';
    pos = 1;
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_dot = false;
  for (; pos < mantissa.size(); ++pos) {
    const char c = mantissa[pos];
    if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_dot) ++frac_digits;
    } else {
      throw InputError("cannot parse number '" + raw + "'");
    }
  }
  if (digits.empty()) throw InputError("cannot parse number '" + raw + "'");
  Integer numerator(digits, 10);
  Integer ten = 10;
  Integer scale;
  const long shift = exponent - frac_digits;
  mpz_pow_ui(scale.get_mpz_t(), ten.get_mpz_t(), static_cast<unsigned long>(std::labs(shift)));
  Rational q = shift >= 0 ? Rational(numerator * scale) : Rational(numerator, scale);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

Integer binomial(Index n, Index k) {
  if (n < 0 || k < 0 || k > n) return 0;
  Integer out;
  mpz_bin_uiui(out.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
  return out;
}

Design Design::bernoulli(Index n_units, Rational p) {
  if (n_units < 1) throw InputError("design needs at least one unit");
  Design d = stratified_bernoulli(std::vector<Index>(static_cast<std::size_t>(n_units), 0), {p});
  d.kind_ = DesignKind::bernoulli;
  return d;
}

Design Design::stratified_bernoulli(std::vector<Index> stratum_of_unit, std::vector<Rational> p) {
  Design d;
  d.kind_ = DesignKind::stratified_bernoulli;
  Index n_strata = 0;
  d.stratum_size_ = count_strata(stratum_of_unit, n_strata);
  if (static_cast<Index>(p.size()) != n_strata) {
    throw InputError("need one treatment probability per stratum");
  }
  for (auto& q : p) {
    q.canonicalize();
    if (q < 0 || q > 1) throw InputError("treatment probability outside [0,1]");
  }
  d.n_units_ = static_cast<Index>(stratum_of_unit.size());
  d.stratum_of_unit_ = std::move(stratum_of_unit);
  d.stratum_p_ = std::move(p);
  return d;
}

Design Design::crd(Index n_units, Index n_treated) {
  if (n_units < 1) throw InputError("design needs at least one unit");
  Design d = stratified_crd(std::vector<Index>(static_cast<std::size_t>(n_units), 0), {n_treated});
  d.kind_ = DesignKind::crd;
  return d;
}

Design Design::stratified_crd(std::vector<Index> stratum_of_unit, std::vector<Index> n_treated) {
  Design d;
  d.kind_ = DesignKind::stratified_crd;
  Index n_strata = 0;
  d.stratum_size_ = count_strata(stratum_of_unit, n_strata);
  if (static_cast<Index>(n_treated.size()) != n_strata) {
    throw InputError("need one treated count per stratum");
  }
  for (Index s = 0; s < n_strata; ++s) {
    if (n_treated[s] < 0 || n_treated[s] > d.stratum_size_[s]) {
      throw InputError("treated count of stratum " + std::to_string(s + 1) +
                       " outside [0, stratum size]");
    }
    d.stratum_combinations_.push_back(binomial(d.stratum_size_[s], n_treated[s]));
  }
  d.n_units_ = static_cast<Index>(stratum_of_unit.size());
  d.stratum_of_unit_ = std::move(stratum_of_unit);
  d.stratum_treated_ = std::move(n_treated);
  return d;
}

Design Design::point_mass(Assignment w) {
  if (w.empty()) throw InputError("design needs at least one unit");
  for (auto v : w) {
    if (v > 1) throw InputError("treatment values must be 0 or 1");
  }
  Design d;
  d.kind_ = DesignKind::point_mass;
  d.n_units_ = static_cast<Index>(w.size());
  d.point_ = std::move(w);
  return d;
}

Design Design::tabulated(Index n_units, std::vector<WeightedAssignment> support) {
  if (n_units < 1) throw InputError("design needs at least one unit");
  std::sort(support.begin(), support.end(),
            [](const auto& a, const auto& b) { return a.values < b.values; });
  Design d;
  d.kind_ = DesignKind::tabulated;
  d.n_units_ = n_units;
  Rational total = 0;
  for (auto& entry : support) {
    if (static_cast<Index>(entry.values.size()) != n_units) {
      throw InputError("tabulated assignment has wrong length");
    }
    for (auto v : entry.values) {
      if (v > 1) throw InputError("treatment values must be 0 or 1");
    }
    entry.probability.canonicalize();
    if (entry.probability < 0) throw InputError("negative probability in tabulated design");
    total += entry.probability;
    if (entry.probability == 0) continue;
    if (!d.table_.empty() && d.table_.back().values == entry.values) {
      d.table_.back().probability += entry.probability;
    } else {
      d.table_.push_back(std::move(entry));
    }
  }
  if (std::abs(to_double(total) - 1.0) > Tolerances::kProbabilitySum) {
    throw InputError("tabulated probabilities must sum to 1");
  }
  return d;
}

std::optional<Index> Design::fixed_treated_count() const {
  switch (kind_) {
    case DesignKind::crd:
    case DesignKind::stratified_crd:
      return std::accumulate(stratum_treated_.begin(), stratum_treated_.end(), Index{0});
    case DesignKind::bernoulli:
    case DesignKind::stratified_bernoulli: {
      Index count = 0;
      for (Index s = 0; s < n_strata(); ++s) {
        if (stratum_p_[s] == 1) {
          count += stratum_size_[s];
        } else if (stratum_p_[s] != 0) {
          return std::nullopt;
        }
      }
      return count;
    }
    case DesignKind::point_mass:
      return std::accumulate(point_.begin(), point_.end(), Index{0});
    case DesignKind::tabulated: {
      std::optional<Index> count;
      for (const auto& entry : table_) {
        const auto c = std::accumulate(entry.values.begin(), entry.values.end(), Index{0});
        if (count && *count != c) return std::nullopt;
        count = c;
      }
      return count;
    }
  }
  return std::nullopt;
}

void Design::validate_subset(std::span<const Index> subset,
                             std::span<const std::uint8_t> values) const {
  if (subset.size() != values.size()) throw InputError("subset and values differ in length");
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (subset[i] < 0 || subset[i] >= n_units_) throw InputError("unit index out of range");
    if (values[i] > 1) throw InputError("treatment values must be 0 or 1");
  }
}

bool Design::merged_counts(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                           std::span<const Index> s2, std::span<const std::uint8_t> a2,
                           std::vector<Index>& ones, std::vector<Index>& zeros,
                           std::vector<std::pair<Index, std::uint8_t>>* items) const {
  const bool stratified = !stratum_size_.empty();
  if (stratified) {
    ones.assign(stratum_size_.size(), 0);
    zeros.assign(stratum_size_.size(), 0);
  }
  auto emit = [&](Index unit, std::uint8_t value) {
    if (stratified) {
      (value ? ones : zeros)[stratum_of_unit_[unit]] += 1;
    }
    if (items) items->emplace_back(unit, value);
  };
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < s1.size() || j < s2.size()) {
    if (j == s2.size() || (i < s1.size() && s1[i] < s2[j])) {
      emit(s1[i], a1[i]);
      ++i;
    } else if (i == s1.size() || s2[j] < s1[i]) {
      emit(s2[j], a2[j]);
      ++j;
    } else {
      if (a1[i] != a2[j]) return false;
      emit(s1[i], a1[i]);
      ++i;
      ++j;
    }
  }
  return true;
}

bool Design::feasible(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                      std::span<const Index> s2, std::span<const std::uint8_t> a2) const {
  std::vector<Index> ones;
  std::vector<Index> zeros;
  if (kind_ == DesignKind::point_mass || kind_ == DesignKind::tabulated) {
    std::vector<std::pair<Index, std::uint8_t>> items;
    if (!merged_counts(s1, a1, s2, a2, ones, zeros, &items)) return false;
    if (kind_ == DesignKind::point_mass) {
      return std::all_of(items.begin(), items.end(),
                         [&](const auto& it) { return point_[it.first] == it.second; });
    }
    return std::any_of(table_.begin(), table_.end(), [&](const WeightedAssignment& entry) {
      return std::all_of(items.begin(), items.end(),
                         [&](const auto& it) { return entry.values[it.first] == it.second; });
    });
  }
  if (!merged_counts(s1, a1, s2, a2, ones, zeros, nullptr)) return false;
  for (std::size_t s = 0; s < stratum_size_.size(); ++s) {
    if (is_bernoulli_type()) {
      if (ones[s] > 0 && stratum_p_[s] == 0) return false;
      if (zeros[s] > 0 && stratum_p_[s] == 1) return false;
    } else {
      if (ones[s] > stratum_treated_[s]) return false;
      if (zeros[s] > stratum_size_[s] - stratum_treated_[s]) return false;
    }
  }
  return true;
}

Rational Design::evaluate(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                          std::span<const Index> s2, std::span<const std::uint8_t> a2) const {
  std::vector<Index> ones;
  std::vector<Index> zeros;
  if (kind_ == DesignKind::point_mass) return feasible(s1, a1, s2, a2) ? 1 : 0;
  if (kind_ == DesignKind::tabulated) {
    std::vector<std::pair<Index, std::uint8_t>> items;
    if (!merged_counts(s1, a1, s2, a2, ones, zeros, &items)) return 0;
    Rational total = 0;
    for (const auto& entry : table_) {
      const bool match = std::all_of(items.begin(), items.end(), [&](const auto& it) {
        return entry.values[it.first] == it.second;
      });
      if (match) total += entry.probability;
    }
    return total;
  }
  if (!merged_counts(s1, a1, s2, a2, ones, zeros, nullptr)) return 0;
  Rational result = 1;
  for (std::size_t s = 0; s < stratum_size_.size(); ++s) {
    if (ones[s] == 0 && zeros[s] == 0) continue;
    if (is_bernoulli_type()) {
      const Rational& p = stratum_p_[s];
      result *= pow_rational(p, ones[s]) * pow_rational(Rational(1 - p), zeros[s]);
    } else {
      const Index free_units = stratum_size_[s] - ones[s] - zeros[s];
      const Index free_treated = stratum_treated_[s] - ones[s];
      const Integer ways = binomial(free_units, free_treated);
      if (ways == 0) return 0;
      result *= Rational(ways, stratum_combinations_[s]);
    }
    if (result == 0) return 0;
  }
  result.canonicalize();
  return result;
}

Rational Design::marginal_prob(std::span<const Index> subset,
                               std::span<const std::uint8_t> values) const {
  validate_subset(subset, values);
  if (strictly_increasing(subset)) return evaluate(subset, values, {}, {});
  const auto sorted = sort_constraint(subset, values);
  if (!sorted) return 0;
  return evaluate(sorted->units, sorted->values, {}, {});
}

Rational Design::joint_prob(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                            std::span<const Index> s2, std::span<const std::uint8_t> a2) const {
  validate_subset(s1, a1);
  validate_subset(s2, a2);
  if (strictly_increasing(s1) && strictly_increasing(s2)) return evaluate(s1, a1, s2, a2);
  const auto c1 = sort_constraint(s1, a1);
  const auto c2 = sort_constraint(s2, a2);
  if (!c1 || !c2) return 0;
  return evaluate(c1->units, c1->values, c2->units, c2->values);
}

bool Design::is_possible(std::span<const Index> subset,
                         std::span<const std::uint8_t> values) const {
  validate_subset(subset, values);
  if (strictly_increasing(subset)) return feasible(subset, values, {}, {});
  const auto sorted = sort_constraint(subset, values);
  return sorted && feasible(sorted->units, sorted->values, {}, {});
}

bool Design::joint_possible(std::span<const Index> s1, std::span<const std::uint8_t> a1,
                            std::span<const Index> s2, std::span<const std::uint8_t> a2) const {
  validate_subset(s1, a1);
  validate_subset(s2, a2);
  if (strictly_increasing(s1) && strictly_increasing(s2)) return feasible(s1, a1, s2, a2);
  const auto c1 = sort_constraint(s1, a1);
  const auto c2 = sort_constraint(s2, a2);
  return c1 && c2 && feasible(c1->units, c1->values, c2->units, c2->values);
}

Rational Design::probability_of(std::span<const std::uint8_t> w) const {
  if (static_cast<Index>(w.size()) != n_units_) {
    throw InputError("treatment vector length does not match the design");
  }
  std::vector<Index> all(w.size());
  std::iota(all.begin(), all.end(), Index{0});
  return marginal_prob(all, w);
}

std::vector<Rational> Design::local_distribution(std::span<const Index> subset,
                                                 std::size_t cap) const {
  if (subset.size() > cap || subset.size() >= 63) {
    throw EnumerationCapExceeded("subset of " + std::to_string(subset.size()) +
                                 " units exceeds the enumeration cap of " + std::to_string(cap));
  }
  if (!strictly_increasing(subset)) throw InputError("subset must be sorted and unique");
  Assignment values(subset.size());
  validate_subset(subset, values);
  const LocalMask count = LocalMask{1} << subset.size();
  std::vector<Rational> out(count);
  for (LocalMask mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < subset.size(); ++i) values[i] = (mask >> i) & 1U;
    out[mask] = feasible(subset, values, {}, {}) ? evaluate(subset, values, {}, {}) : Rational(0);
  }
  return out;
}

std::vector<WeightedAssignment> Design::support(std::span<const Index> subset,
                                                std::size_t cap) const {
  const auto table = local_distribution(subset, cap);
  std::vector<WeightedAssignment> out;
  for (LocalMask mask = 0; mask < table.size(); ++mask) {
    if (table[mask] == 0) continue;
    Assignment values(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) values[i] = (mask >> i) & 1U;
    out.push_back({std::move(values), table[mask]});
  }
  return out;
}

Integer Design::support_size() const {
  switch (kind_) {
    case DesignKind::point_mass: return 1;
    case DesignKind::tabulated: return static_cast<unsigned long>(table_.size());
    case DesignKind::crd:
    case DesignKind::stratified_crd: {
      Integer total = 1;
      for (const auto& c : stratum_combinations_) total *= c;
      return total;
    }
    case DesignKind::bernoulli:
    case DesignKind::stratified_bernoulli: {
      Index free_units = 0;
      for (Index n = 0; n < n_units_; ++n) {
        const auto& p = stratum_p_[stratum_of_unit_[n]];
        if (p != 0 && p != 1) ++free_units;
      }
      Integer total;
      mpz_ui_pow_ui(total.get_mpz_t(), 2, static_cast<unsigned long>(free_units));
      return total;
    }
  }
  return 0;
}

std::vector<WeightedAssignment> Design::enumerate(std::size_t max_assignments) const {
  const Integer size = support_size();
  if (size > Integer(static_cast<unsigned long>(max_assignments))) {
    throw EnumerationCapExceeded("design support of " + size.get_str() +
                                 " assignments exceeds the cap of " +
                                 std::to_string(max_assignments));
  }
  std::vector<WeightedAssignment> out;
  if (kind_ == DesignKind::point_mass) {
    out.push_back({point_, Rational(1)});
    return out;
  }
  if (kind_ == DesignKind::tabulated) return table_;

  if (is_bernoulli_type()) {
    std::vector<Index> free_units;
    Assignment base(static_cast<std::size_t>(n_units_), 0);
    for (Index n = 0; n < n_units_; ++n) {
      const auto& p = stratum_p_[stratum_of_unit_[n]];
      if (p == 1) {
        base[n] = 1;
      } else if (p != 0) {
        free_units.push_back(n);
      }
    }
    const LocalMask count = LocalMask{1} << free_units.size();
    out.reserve(count);
    for (LocalMask mask = 0; mask < count; ++mask) {
      Assignment w = base;
      Rational prob = 1;
      for (std::size_t i = 0; i < free_units.size(); ++i) {
        const auto n = free_units[i];
        const auto& p = stratum_p_[stratum_of_unit_[n]];
        w[n] = (mask >> i) & 1U;
        prob *= w[n] ? p : Rational(1 - p);
      }
      prob.canonicalize();
      out.push_back({std::move(w), prob});
    }
    return out;
  }

  // CRD kinds: cartesian product of per-stratum combinations.
  std::vector<std::vector<Index>> units(stratum_size_.size());
  for (Index n = 0; n < n_units_; ++n) units[stratum_of_unit_[n]].push_back(n);
  std::vector<std::vector<Assignment>> per_stratum(units.size());
  for (std::size_t s = 0; s < units.size(); ++s) {
    const auto size = units[s].size();
    Assignment pattern(size, 0);
    std::fill(pattern.end() - stratum_treated_[s], pattern.end(), 1);
    do {
      per_stratum[s].push_back(pattern);
    } while (std::next_permutation(pattern.begin(), pattern.end()));
  }
  Rational prob(1, size);
  prob.canonicalize();
  std::vector<std::size_t> digit(units.size(), 0);
  while (true) {
    Assignment w(static_cast<std::size_t>(n_units_), 0);
    for (std::size_t s = 0; s < units.size(); ++s) {
      const auto& pattern = per_stratum[s][digit[s]];
      for (std::size_t i = 0; i < units[s].size(); ++i) w[units[s][i]] = pattern[i];
    }
    out.push_back({std::move(w), prob});
    std::size_t s = 0;
    while (s < units.size() && ++digit[s] == per_stratum[s].size()) {
      digit[s] = 0;
      ++s;
    }
    if (s == units.size()) break;
  }
  return out;
}

Assignment Design::sample(std::mt19937_64& rng) const {
  Assignment w(static_cast<std::size_t>(n_units_), 0);
  switch (kind_) {
    case DesignKind::point_mass:
      return point_;
    case DesignKind::tabulated: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const double u = unif(rng);
      double acc = 0.0;
      for (const auto& entry : table_) {
        acc += to_double(entry.probability);
        if (u < acc) return entry.values;
      }
      return table_.back().values;
    }
    case DesignKind::bernoulli:
    case DesignKind::stratified_bernoulli: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (Index n = 0; n < n_units_; ++n) {
        const auto& p = stratum_p_[stratum_of_unit_[n]];
        if (p == 1) {
          w[n] = 1;
        } else if (p != 0) {
          w[n] = unif(rng) < to_double(p) ? 1 : 0;
        }
      }
      return w;
    }
    case DesignKind::crd:
    case DesignKind::stratified_crd: {
      std::vector<std::vector<Index>> units(stratum_size_.size());
      for (Index n = 0; n < n_units_; ++n) units[stratum_of_unit_[n]].push_back(n);
      for (std::size_t s = 0; s < units.size(); ++s) {
        auto& pool = units[s];
        // Partial Fisher-Yates: the first n_treated slots are a uniform draw.
        for (Index i = 0; i < stratum_treated_[s]; ++i) {
          std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                          pool.size() - 1);
          std::swap(pool[i], pool[pick(rng)]);
          w[pool[i]] = 1;
        }
      }
      return w;
    }
  }
  return w;
}

Assignment Design::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  return sample(rng);
}

std::string Design::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(N=" << n_units_;
  switch (kind_) {
    case DesignKind::bernoulli: os << ", p=" << stratum_p_[0].get_str(); break;
    case DesignKind::crd: os << ", n_treated=" << stratum_treated_[0]; break;
    case DesignKind::stratified_bernoulli:
    case DesignKind::stratified_crd: os << ", strata=" << stratum_size_.size(); break;
    case DesignKind::point_mass: {
      os << ", w=";
      for (auto v : point_) os << int(v);
      break;
    }
    case DesignKind::tabulated: os << ", support=" << table_.size(); break;
  }
  os << ")";
  return os.str();
}

namespace {

template <class Crd, class Bern>
Design restratify(const Design& d, Crd crd_rule, Bern bern_rule) {
  const auto sizes = d.stratum_sizes();
  std::vector<Index> strata(d.stratum_of_unit().begin(), d.stratum_of_unit().end());
  if (d.is_crd_type()) {
    std::vector<Index> treated;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      treated.push_back(std::min(sizes[s], crd_rule(sizes[s], d.stratum_treated()[s])));
    }
    if (d.kind() == DesignKind::crd) return Design::crd(d.n_units(), treated[0]);
    return Design::stratified_crd(std::move(strata), std::move(treated));
  }
  if (d.is_bernoulli_type()) {
    std::vector<Rational> p;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      Rational next = bern_rule(sizes[s], d.stratum_probabilities()[s]);
      if (next > 1) next = 1;
      p.push_back(next);
    }
    if (d.kind() == DesignKind::bernoulli) return Design::bernoulli(d.n_units(), p[0]);
    return Design::stratified_bernoulli(std::move(strata), std::move(p));
  }
  throw InputError("shifted policies need a Bernoulli or completely randomized design");
}

}  // namespace

Design shift_treated(const Design& d, Index k) {
  if (k < 0) throw InputError("shift must be non-negative");
  return restratify(
      d, [k](Index, Index t) { return t + k; },
      [k](Index size, const Rational& p) {
        Rational out = p + Rational(k, size);
        out.canonicalize();
        return out;
      });
}

Design treat_half_controls(const Design& d) {
  return restratify(
      d, [](Index size, Index t) { return t + (size - t) / 2; },
      [](Index size, const Rational& p) {
        // Expected controls (1 - p) size, halved and rounded down.
        const Rational controls = (1 - p) * size;
        Integer half = controls.get_num() / (2 * controls.get_den());
        Rational out = p + Rational(half, size);
        out.canonicalize();
        return out;
      });
}

}  // namespace bipartite
