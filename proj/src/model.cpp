#include "riskfleet/model.hpp"

#include <cmath>

namespace riskfleet {

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::FireDetection: return "fire_detection";
    case TaskKind::PestDetection: return "pest_detection";
    case TaskKind::GrowthMonitoring: return "growth_monitoring";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "fire_detection" || s == "fire") return TaskKind::FireDetection;
  if (s == "pest_detection" || s == "pest") return TaskKind::PestDetection;
  if (s == "growth_monitoring" || s == "growth") return TaskKind::GrowthMonitoring;
  throw ConfigError("unknown task kind: " + s);
}

void TaskType::validate() const {
  if (!(mean_interarrival > 0)) throw ConfigError("task type: mean_interarrival must be > 0");
  if (!(deadline > 0)) throw ConfigError("task type: deadline must be > 0");
  if (!(proc_time_uav > 0) || !(proc_time_mec > 0))
    throw ConfigError("task type: processing times must be > 0");
  if (!(proc_time_mec < proc_time_uav))
    throw ConfigError("task type: MEC processing time must be below the UAV time");
  if (is_fire != (kind == TaskKind::FireDetection))
    throw ConfigError("task type: is_fire must mark exactly the fire-detection type");
}

void EnergyProfile::validate() const {
  if (!(battery_capacity > 0) || !(hover_power > 0) || !(antenna_power > 0) ||
      !(cpu_idle_power > 0) || !(cpu_active_power > 0))
    throw ConfigError("energy profile: all values must be > 0");
  if (!(cpu_active_power > cpu_idle_power))
    throw ConfigError("energy profile: active CPU power must exceed idle power");
}

void LinkDelayModel::validate() const {
  if (iot_uav_delay < 0 || uav_uav_delay < 0 || uav_mec_delay < 0)
    throw ConfigError("link delays must be >= 0");
  if (jitter_fraction < 0 || jitter_fraction >= 1)
    throw ConfigError("link jitter_fraction must be in [0, 1)");
}

double remaining_energy(ComputeNode& node, double now) {
  expect(node.role == NodeRole::Uav, "remaining_energy queried on a MEC node");
  expect(now >= 0, "remaining_energy: negative query time");
  expect(now >= node.last_energy_query, "remaining_energy: clock went backwards");
  node.last_energy_query = now;

  const EnergyProfile& p = node.energy;
  const double hours = now / node.seconds_per_hour;
  const double active_hours = node.cpu_active_seconds / node.seconds_per_hour;
  const double consumed = (p.hover_power + p.antenna_power + p.cpu_idle_power) * hours +
                          (p.cpu_active_power - p.cpu_idle_power) * active_hours;
  const double remaining = p.battery_capacity - consumed;
  return remaining > 0 ? remaining / p.battery_capacity : 0.0;
}

bool node_depleted(ComputeNode& node, double now) {
  if (node.role == NodeRole::Mec) return false;
  if (node.depleted_latch) return true;
  if (remaining_energy(node, now) <= 0.0) node.depleted_latch = true;
  return node.depleted_latch;
}

bool total_energy_identity_check(const ComputeNode& node,
                                 std::span<const ProcessingLogEntry> log,
                                 double final_clock) {
  if (node.role != NodeRole::Uav) return true;
  double active_seconds = 0;
  for (const auto& e : log)
    if (e.node == node.id) active_seconds += e.processing_seconds;

  const EnergyProfile& p = node.energy;
  const double base = (p.hover_power + p.antenna_power + p.cpu_idle_power) *
                      (final_clock / node.seconds_per_hour);
  const double active_term = p.cpu_active_power - p.cpu_idle_power;
  const double from_log = base + active_term * (active_seconds / node.seconds_per_hour);
  const double from_accumulator = base + active_term * (node.cpu_active_seconds / node.seconds_per_hour);

  const double scale = std::max({std::abs(from_log), std::abs(from_accumulator), 1.0});
  return std::abs(from_log - from_accumulator) <= 1e-9 * scale;
}

std::vector<int> ScenarioConfig::block_assignment(int num_iot, int num_uav) {
  std::vector<int> out(static_cast<std::size_t>(num_iot));
  if (num_uav <= 0) return out;
  const int per_uav = std::max(1, (num_iot + num_uav - 1) / num_uav);
  for (int d = 0; d < num_iot; ++d) out[static_cast<std::size_t>(d)] = std::min(d / per_uav, num_uav - 1);
  return out;
}

void ScenarioConfig::validate() const {
  if (num_iot < 0) throw ConfigError("num_iot must be >= 0");
  if (num_uav < 1) throw ConfigError("num_uav must be >= 1");
  if (num_mec < 1) throw ConfigError("num_mec must be >= 1");
  if (sim_duration < 0) throw ConfigError("sim_duration must be >= 0");
  if (task_types.empty()) throw ConfigError("at least one task type is required");
  for (const auto& t : task_types) t.validate();
  if (static_cast<int>(iot_assignment.size()) != num_iot)
    throw ConfigError("iot_assignment must name a receiving UAV for every device");
  for (int uav : iot_assignment)
    if (uav < 0 || uav >= num_uav) throw ConfigError("iot_assignment maps a device to a missing UAV");
  link_delays.validate();
  if (static_cast<int>(energy_profiles.size()) != num_uav)
    throw ConfigError("one energy profile per UAV is required");
  for (const auto& p : energy_profiles) p.validate();
  if (!(seconds_per_hour > 0)) throw ConfigError("seconds_per_hour must be > 0");
}

}  // namespace riskfleet
