#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskfleet/simcore.hpp"

namespace riskfleet {

struct MetricsParams {
  double weight = 0.5;          // energy vs delay/violation trade-off
  double delay_norm = 15.0;     // normalizes the mean-delay term
  double violation_norm = 50.0; // normalizes the violation-count term

  void validate() const;
};

struct DelaySummary {
  std::uint64_t count = 0;
  double mean = 0;
  double p50 = 0;
  double p90 = 0;
  double p99 = 0;
};

struct KpiReport {
  std::uint64_t generated = 0;
  std::uint64_t completed = 0;
  std::uint64_t violated_by_depletion = 0;
  std::uint64_t violations_total = 0;
  std::vector<std::uint64_t> generated_by_type;
  std::vector<std::uint64_t> violations_by_type;
  double violation_rate = 0;
  std::vector<double> violation_rate_by_type;
  DelaySummary delay;                      // end-to-end, completed tasks only
  std::vector<DelaySummary> delay_by_node; // keyed by destination node
  std::vector<double> remaining_energy;    // per UAV at the final clock
  double min_remaining_energy = 0;
  bool delay_defined = false;  // false when nothing completed
  double objective_value = 0;  // filled by objective()
};

// Nearest-rank percentile, p in (0, 100]. Takes a copy and sorts it.
double percentile(std::vector<double> values, double p);

KpiReport compute_kpis(const Trace& trace);

// weight * worst remaining energy, minus normalized penalties for mean delay
// and the violation count.
double objective(const KpiReport& report, const MetricsParams& params);

// Flat column view of a report, used for CSV rows and cross-seed averaging.
struct KpiRow {
  std::vector<std::string> names;
  std::vector<double> values;
};

KpiRow kpi_row(const KpiReport& report);

// Column-wise mean; each column is summed in sorted order so the result does
// not depend on seed ordering.
KpiRow average_rows(const std::vector<KpiRow>& rows);

// First episode index at which the trailing-window least-squares slope of the
// smoothed reward trace stays within slope_tol. The returned value counts
// episodes consumed, so a flat trace yields exactly `window`.
std::optional<int> convergence_detector(const std::vector<double>& rewards, int window,
                                        double slope_tol);

}  // namespace riskfleet
