#pragma once

#include <cstddef>
#include <set>

#include "riskfleet/errors.hpp"

namespace riskfleet {

// Tolerance for deciding whether an eta value is zero / two etas are equal.
// Exact float equality is meaningless after tail-sum accumulation.
inline constexpr double kEtaZeroTol = 1e-12;

struct RiskParams {
  double energy_growth = 2.0;   // g
  double fire_growth = 8.0;     // s
  double other_growth = 1.0;    // w
  double energy_scale = 1.0;    // Gamma
  double alpha_percent = 2.0;   // two-tailed percentile width
  double beta = 0.75;           // mixing weight toward the worst-off agent

  void validate() const;
};

// Ordered multiset of total action costs for one agent. eta is computed from
// the lowest and highest alpha/2-percent tails.
class RiskLedger {
 public:
  void add(double cost) { costs_.insert(cost); }
  void clear() { costs_.clear(); }
  std::size_t size() const { return costs_.size(); }
  const std::multiset<double>& costs() const { return costs_; }

 private:
  std::multiset<double> costs_;
};

// (1 - remaining)^g: cheap while the battery is full, steep as it empties.
double energy_cost(double remaining, const RiskParams& params);

// Signed distance-to-deadline cost. Magnitude |deadline - delay|^s for fire
// tasks, ^w otherwise; negative when the task beat its deadline, zero at the
// deadline, positive past it.
double delay_cost(double delay, double deadline, bool is_fire, const RiskParams& params);

// Gamma * C_e + C_d.
double total_cost(double energy_cost_value, double delay_cost_value, const RiskParams& params);

// Two-tailed risk measurement: with m = max(1, floor((alpha/2/100) * n)), the
// mean of the m smallest and m largest costs. Empty ledger yields 0.
double risk_measure(const RiskLedger& ledger, const RiskParams& params);

// Reward table over the (eta_after vs eta_before, sign of eta_after) cases.
// Comparisons use zero_tol both for ordering and for the sign of eta_after.
int reward_value(double eta_after, double eta_before, double zero_tol = kEtaZeroTol);

}  // namespace riskfleet
