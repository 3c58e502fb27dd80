#include "riskfleet/risk.hpp"

#include <cmath>
#include <cstdlib>

namespace riskfleet {

void RiskParams::validate() const {
  if (!(energy_growth >= 1) || !(fire_growth >= 1) || !(other_growth >= 1))
    throw ConfigError("risk growth exponents must be >= 1");
  if (!(alpha_percent > 0) || !(alpha_percent <= 100))
    throw ConfigError("alpha_percent must be in (0, 100]");
  if (!(beta >= 0) || !(beta <= 1)) throw ConfigError("beta must be in [0, 1]");
  if (!(energy_scale >= 0)) throw ConfigError("energy_scale must be >= 0");
}

double energy_cost(double remaining, const RiskParams& params) {
  expect(remaining >= 0.0 && remaining <= 1.0, "energy_cost: remaining fraction out of [0,1]");
  return std::pow(1.0 - remaining, params.energy_growth);
}

double delay_cost(double delay, double deadline, bool is_fire, const RiskParams& params) {
  expect(delay >= 0.0, "delay_cost: negative delay");
  expect(deadline > 0.0, "delay_cost: deadline must be positive");
  if (delay == deadline) return 0.0;
  const double growth = is_fire ? params.fire_growth : params.other_growth;
  const double magnitude = std::pow(std::abs(deadline - delay), growth);
  return delay < deadline ? -magnitude : magnitude;
}

double total_cost(double energy_cost_value, double delay_cost_value, const RiskParams& params) {
  return params.energy_scale * energy_cost_value + delay_cost_value;
}

double risk_measure(const RiskLedger& ledger, const RiskParams& params) {
  const std::size_t n = ledger.size();
  if (n == 0) return 0.0;

  const double tail_fraction = params.alpha_percent / 2.0 / 100.0;
  std::size_t m = static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(n)));
  if (m < 1) m = 1;
  if (m > n) m = n;

  const auto& costs = ledger.costs();
  double sum = 0.0;
  auto lo = costs.begin();
  for (std::size_t i = 0; i < m; ++i, ++lo) sum += *lo;
  auto hi = costs.rbegin();
  for (std::size_t i = 0; i < m; ++i, ++hi) sum += *hi;
  return sum / static_cast<double>(2 * m);
}

int reward_value(double eta_after, double eta_before, double zero_tol) {
  const bool decreased = eta_after < eta_before - zero_tol;
  const bool increased = eta_after > eta_before + zero_tol;
  const int sign = eta_after < -zero_tol ? -1 : (eta_after > zero_tol ? 1 : 0);

  if (decreased) return sign < 0 ? 20 : (sign == 0 ? 10 : 1);
  if (increased) return sign < 0 ? 1 : (sign == 0 ? -1 : -10);
  return sign < 0 ? 5 : (sign == 0 ? 2 : -5);
}

}  // namespace riskfleet
