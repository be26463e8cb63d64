#ifndef BIPARTITE_ESTIMAND_HPP
#define BIPARTITE_ESTIMAND_HPP

#include <memory>
#include <string>

#include "bipartite/policy.hpp"

namespace bipartite {

enum class EstimandKind {
  mean_po,              // Y(a) for a constant arm a
  all_or_none,          // Y(1) - Y(0)
  status_quo_vs_none,   // observed - Y(0)
  all_vs_status_quo,    // Y(1) - observed
  stochastic,           // Y_h
  stochastic_contrast,  // Y_h' - Y_h
  stochastic_vs_observed,  // Y_h - observed
  plus_k                // Y^{+K} - observed
};

std::string to_string(EstimandKind kind);

struct EstimandSpec {
  EstimandKind kind = EstimandKind::all_or_none;
  int arm = 1;  // mean_po only
  std::shared_ptr<const LocalPolicy> h;        // stochastic kinds; h_alpha
  std::shared_ptr<const LocalPolicy> h_prime;  // contrast only; h_alpha'
  Index k = 1;                                 // plus_k only

  static EstimandSpec mean_po(int arm);
  static EstimandSpec all_or_none();
  static EstimandSpec status_quo_vs_none();
  static EstimandSpec all_vs_status_quo();
  static EstimandSpec stochastic(std::shared_ptr<const LocalPolicy> h);
  static EstimandSpec stochastic_contrast(std::shared_ptr<const LocalPolicy> h,
                                          std::shared_ptr<const LocalPolicy> h_prime);
  static EstimandSpec stochastic_vs_observed(std::shared_ptr<const LocalPolicy> h);
  static EstimandSpec plus_k(Index k);

  /// Short identifier used in reports, e.g. "aon", "plus_2", "stoch[bernoulli(1/2)]".
  std::string id() const;
};

}  // namespace bipartite

#endif  // BIPARTITE_ESTIMAND_HPP
