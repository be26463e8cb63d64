#include "bipartite/estimand.hpp"

namespace bipartite {

std::string to_string(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::mean_po: return "mean_po";
    case EstimandKind::all_or_none: return "all_or_none";
    case EstimandKind::status_quo_vs_none: return "status_quo_vs_none";
    case EstimandKind::all_vs_status_quo: return "all_vs_status_quo";
    case EstimandKind::stochastic: return "stochastic";
    case EstimandKind::stochastic_contrast: return "stochastic_contrast";
    case EstimandKind::stochastic_vs_observed: return "stochastic_vs_observed";
    case EstimandKind::plus_k: return "plus_k";
  }
  return "unknown";
}

EstimandSpec EstimandSpec::mean_po(int arm) {
  if (arm != 0 && arm != 1) throw InputError("arm must be 0 or 1");
  EstimandSpec s;
  s.kind = EstimandKind::mean_po;
  s.arm = arm;
  return s;
}

EstimandSpec EstimandSpec::all_or_none() { return EstimandSpec{}; }

EstimandSpec EstimandSpec::status_quo_vs_none() {
  EstimandSpec s;
  s.kind = EstimandKind::status_quo_vs_none;
  return s;
}

EstimandSpec EstimandSpec::all_vs_status_quo() {
  EstimandSpec s;
  s.kind = EstimandKind::all_vs_status_quo;
  return s;
}

EstimandSpec EstimandSpec::stochastic(std::shared_ptr<const LocalPolicy> h) {
  if (!h) throw InputError("stochastic estimand needs a policy");
  EstimandSpec s;
  s.kind = EstimandKind::stochastic;
  s.h = std::move(h);
  return s;
}

EstimandSpec EstimandSpec::stochastic_contrast(std::shared_ptr<const LocalPolicy> h,
                                               std::shared_ptr<const LocalPolicy> h_prime) {
  if (!h || !h_prime) throw InputError("stochastic contrast needs two policies");
  EstimandSpec s;
  s.kind = EstimandKind::stochastic_contrast;
  s.h = std::move(h);
  s.h_prime = std::move(h_prime);
  return s;
}

EstimandSpec EstimandSpec::stochastic_vs_observed(std::shared_ptr<const LocalPolicy> h) {
  EstimandSpec s = stochastic(std::move(h));
  s.kind = EstimandKind::stochastic_vs_observed;
  return s;
}

EstimandSpec EstimandSpec::plus_k(Index k) {
  if (k < 1) throw InputError("K must be at least 1");
  EstimandSpec s;
  s.kind = EstimandKind::plus_k;
  s.k = k;
  return s;
}

std::string EstimandSpec::id() const {
  switch (kind) {
    case EstimandKind::mean_po: return "mean" + std::to_string(arm);
    case EstimandKind::all_or_none: return "aon";
    case EstimandKind::status_quo_vs_none: return "sq1";
    case EstimandKind::all_vs_status_quo: return "sq0";
    case EstimandKind::stochastic: return "stoch[" + h->label() + "]";
    case EstimandKind::stochastic_contrast:
      return "contrast[" + h_prime->label() + " vs " + h->label() + "]";
    case EstimandKind::stochastic_vs_observed: return "stoch_sq[" + h->label() + "]";
    case EstimandKind::plus_k: return "plus_" + std::to_string(k);
  }
  return "unknown";
}

}  // namespace bipartite
