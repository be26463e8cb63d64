#ifndef BIPARTITE_TYPES_HPP
#define BIPARTITE_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <gmpxx.h>

namespace bipartite {

/// 0-based unit index. File formats and reports use 1-based ids.
using Index = std::int64_t;

/// Treatment vector over intervention units, entries in {0,1}.
using Assignment = std::vector<std::uint8_t>;

/// Local treatment vector packed as bits: bit i is the treatment of the i-th
/// smallest intervention unit of the set it refers to.
using LocalMask = std::uint64_t;

using Rational = mpq_class;
using Integer = mpz_class;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Numeric tolerances used across the library.
struct Tolerances {
  static constexpr double kProbabilitySum = 1e-12;
  static constexpr double kSupportSum = 1e-10;
  static constexpr double kImplementable = 1e-10;
  static constexpr double kOracle = 1e-10;
  static constexpr double kStatisticTie = 1e-10;
};

/// Default cap on the size of a unit subset whose local assignments get
/// enumerated (2^20 vectors).
inline constexpr std::size_t kDefaultEnumerationCap = 20;

/// Default cap on the number of full assignments the oracle will enumerate.
inline constexpr std::size_t kDefaultOracleCap = std::size_t{1} << 16;

/// Malformed input such as a bad index or an unparseable file.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An enumeration would exceed its configured cap.
class EnumerationCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Positivity screening left no outcome unit to average over.
class EmptyRetainedSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A design or policy precondition does not hold (e.g. +K under a design
/// without a fixed treated count).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A test statistic is undefined for the given assignment.
class DegenerateStatistic : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double to_double(const Rational& q) { return q.get_d(); }

/// Parses "3", "0.25", "25/52" or "-1.5e-2" into an exact rational.
Rational parse_rational(const std::string& text);

/// C(n, k) as a big integer; zero when k < 0 or k > n or n < 0.
Integer binomial(Index n, Index k);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline LocalMask full_mask(std::size_t bits) {
  return bits >= 64 ? ~LocalMask{0} : ((LocalMask{1} << bits) - 1);
}

}  // namespace bipartite

#endif  // BIPARTITE_TYPES_HPP
