#include "riskfleet/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace riskfleet {

void MetricsParams::validate() const {
  if (weight < 0 || weight > 1) throw ConfigError("metrics weight must be in [0, 1]");
  if (!(delay_norm > 0)) throw ConfigError("delay_norm must be > 0");
  if (!(violation_norm > 0)) throw ConfigError("violation_norm must be > 0");
}

double percentile(std::vector<double> values, double p) {
  expect(!values.empty(), "percentile of an empty sample");
  expect(p > 0 && p <= 100, "percentile rank out of range");
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

namespace {

DelaySummary summarize(const std::vector<double>& delays) {
  DelaySummary s;
  s.count = delays.size();
  if (delays.empty()) return s;
  double sum = 0;
  for (double d : delays) sum += d;
  s.mean = sum / static_cast<double>(delays.size());
  s.p50 = percentile(delays, 50);
  s.p90 = percentile(delays, 90);
  s.p99 = percentile(delays, 99);
  return s;
}

}  // namespace

KpiReport compute_kpis(const Trace& trace) {
  KpiReport r;
  const std::size_t num_types = static_cast<std::size_t>(trace.num_types);
  const std::size_t num_nodes = static_cast<std::size_t>(trace.num_uav + trace.num_mec);
  r.generated = trace.generated;
  r.generated_by_type.assign(num_types, 0);
  r.violations_by_type.assign(num_types, 0);

  std::vector<double> delays;
  std::vector<std::vector<double>> delays_by_node(num_nodes);
  for (const CompletionRecord& c : trace.completions) {
    r.generated_by_type.at(static_cast<std::size_t>(c.type)) += 1;
    if (c.violated) {
      r.violations_total += 1;
      r.violations_by_type.at(static_cast<std::size_t>(c.type)) += 1;
    }
    if (c.resolution == TaskResolution::ViolatedByDepletion) {
      r.violated_by_depletion += 1;
      continue;
    }
    r.completed += 1;
    delays.push_back(c.delay.total());
    if (c.destination >= 0) delays_by_node.at(static_cast<std::size_t>(c.destination)).push_back(c.delay.total());
  }

  r.violation_rate = r.generated == 0
                         ? 0.0
                         : static_cast<double>(r.violations_total) / static_cast<double>(r.generated);
  r.violation_rate_by_type.assign(num_types, 0.0);
  for (std::size_t k = 0; k < num_types; ++k)
    if (r.generated_by_type[k] > 0)
      r.violation_rate_by_type[k] = static_cast<double>(r.violations_by_type[k]) /
                                    static_cast<double>(r.generated_by_type[k]);

  r.delay = summarize(delays);
  r.delay_defined = !delays.empty();
  r.delay_by_node.reserve(num_nodes);
  for (const auto& node_delays : delays_by_node) r.delay_by_node.push_back(summarize(node_delays));

  r.remaining_energy = trace.final_uav_energy;
  r.min_remaining_energy = 1.0;
  for (double e : r.remaining_energy) r.min_remaining_energy = std::min(r.min_remaining_energy, e);
  return r;
}

double objective(const KpiReport& report, const MetricsParams& params) {
  params.validate();
  return params.weight * report.min_remaining_energy -
         (1.0 - params.weight) / (2.0 * params.delay_norm) * report.delay.mean -
         (1.0 - params.weight) / (2.0 * params.violation_norm) *
             static_cast<double>(report.violations_total);
}

KpiRow kpi_row(const KpiReport& report) {
  KpiRow row;
  auto put = [&](const std::string& name, double value) {
    row.names.push_back(name);
    row.values.push_back(value);
  };
  put("generated", static_cast<double>(report.generated));
  put("completed", static_cast<double>(report.completed));
  put("violated_by_depletion", static_cast<double>(report.violated_by_depletion));
  put("violations_total", static_cast<double>(report.violations_total));
  put("violation_rate", report.violation_rate);
  for (std::size_t k = 0; k < report.violations_by_type.size(); ++k) {
    put("violations_type" + std::to_string(k), static_cast<double>(report.violations_by_type[k]));
    put("violation_rate_type" + std::to_string(k), report.violation_rate_by_type[k]);
  }
  put("mean_delay", report.delay.mean);
  put("p50_delay", report.delay.p50);
  put("p90_delay", report.delay.p90);
  put("p99_delay", report.delay.p99);
  put("min_remaining_energy", report.min_remaining_energy);
  for (std::size_t j = 0; j < report.remaining_energy.size(); ++j)
    put("energy_uav" + std::to_string(j), report.remaining_energy[j]);
  put("objective", report.objective_value);
  return row;
}

KpiRow average_rows(const std::vector<KpiRow>& rows) {
  expect(!rows.empty(), "averaging zero rows");
  KpiRow out;
  out.names = rows.front().names;
  out.values.assign(out.names.size(), 0.0);
  for (const KpiRow& row : rows)
    expect(row.names == out.names, "rows with mismatched columns");
  for (std::size_t col = 0; col < out.names.size(); ++col) {
    std::vector<double> column;
    column.reserve(rows.size());
    for (const KpiRow& row : rows) column.push_back(row.values[col]);
    std::sort(column.begin(), column.end());
    double sum = 0;
    for (double v : column) sum += v;
    out.values[col] = sum / static_cast<double>(rows.size());
  }
  return out;
}

std::optional<int> convergence_detector(const std::vector<double>& rewards, int window,
                                        double slope_tol) {
  expect(window >= 2, "window must be >= 2");
  const int n = static_cast<int>(rewards.size());
  if (n < window) return std::nullopt;

  // Smooth with a short trailing moving average before fitting the slope, so
  // per-episode noise does not mask a flat trend.
  const int ma = std::max(1, window / 10);
  std::vector<double> smooth(static_cast<std::size_t>(n));
  double running = 0;
  for (int i = 0; i < n; ++i) {
    running += rewards[static_cast<std::size_t>(i)];
    if (i >= ma) running -= rewards[static_cast<std::size_t>(i - ma)];
    smooth[static_cast<std::size_t>(i)] = running / static_cast<double>(std::min(i + 1, ma));
  }

  const double w = window;
  const double x_mean = (w - 1.0) / 2.0;
  double sxx = 0;
  for (int k = 0; k < window; ++k) sxx += (k - x_mean) * (k - x_mean);

  for (int end = window; end <= n; ++end) {
    const int begin = end - window;
    double y_mean = 0;
    for (int k = 0; k < window; ++k) y_mean += smooth[static_cast<std::size_t>(begin + k)];
    y_mean /= w;
    double sxy = 0;
    for (int k = 0; k < window; ++k)
      sxy += (k - x_mean) * (smooth[static_cast<std::size_t>(begin + k)] - y_mean);
    if (std::abs(sxy / sxx) <= slope_tol) return end;
  }
  return std::nullopt;
}

}  // namespace riskfleet
