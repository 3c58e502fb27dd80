#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskfleet/errors.hpp"

namespace riskfleet {

enum class TaskKind { FireDetection, PestDetection, GrowthMonitoring };

const char* to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

// One workload class. mean_interarrival is the per-device mean gap; each IoT
// device runs an independent exponential arrival stream per type.
struct TaskType {
  TaskKind kind = TaskKind::FireDetection;
  double mean_interarrival = 0;  // seconds
  double deadline = 0;           // seconds, end-to-end budget
  double proc_time_uav = 0;      // seconds on a UAV CPU
  double proc_time_mec = 0;      // seconds on a MEC CPU
  bool is_fire = false;

  void validate() const;
};

// End-to-end delay components of one task. Filled in as the task progresses.
struct DelayBreakdown {
  double iot_to_uav = 0;
  double relay = 0;
  double queue_wait = 0;
  double processing = 0;

  double total() const { return iot_to_uav + relay + queue_wait + processing; }
};

enum class TaskResolution { Pending, Completed, ViolatedByDepletion };

// (receiving UAV, generation time) names the task; seq breaks exact-time ties
// and gives the event queue a total order.
struct TaskId {
  int receiver_uav = -1;
  double generated_at = 0;
  std::uint64_t seq = 0;
};

struct Task {
  TaskId id;
  int type = 0;  // index into ScenarioConfig::task_types
  int origin_iot = -1;
  double created_at = 0;
  DelayBreakdown delay;
  std::optional<int> destination;
  std::optional<double> completed_at;
  std::optional<bool> violated;
  TaskResolution resolution = TaskResolution::Pending;

  // run-time bookkeeping
  double dest_arrival_at = 0;
  double dest_mean_uplink_at_enqueue = 0;
  double iot_jitter_u = 0;
  double relay_jitter_u = 0;
};

// Battery capacity plus per-hour power draws for one UAV. Elapsed simulated
// seconds are converted via ScenarioConfig::seconds_per_hour, a config knob so
// other unit readings of the drain model can be tested.
struct EnergyProfile {
  double battery_capacity = 0;
  double hover_power = 0;
  double antenna_power = 0;
  double cpu_idle_power = 0;
  double cpu_active_power = 0;

  void validate() const;
};

enum class NodeRole { Uav, Mec };

// A computing resource: one FIFO queue, one CPU. UAVs also carry a battery.
struct ComputeNode {
  int id = 0;
  NodeRole role = NodeRole::Uav;
  EnergyProfile energy;         // UAV only
  double seconds_per_hour = 3600.0;

  std::deque<int> queue;        // task indices, FIFO
  int busy_task = -1;           // -1 while the CPU is idle
  double busy_until = 0;
  double cpu_active_seconds = 0;

  std::uint64_t completed_count = 0;
  double completed_delay_sum = 0;

  double last_energy_query = 0;
  bool depleted_latch = false;

  bool is_uav() const { return role == NodeRole::Uav; }

  double mean_completed_delay() const {
    return completed_count == 0 ? 0.0 : completed_delay_sum / static_cast<double>(completed_count);
  }
};

// Remaining battery fraction at `now`: base loads (hover + antenna + idle CPU)
// drain with wall-clock hours, the CPU adds (active - idle) for the hours it
// actually computed. Clamped at zero. Queries must use a monotone clock.
double remaining_energy(ComputeNode& node, double now);

// True once remaining_energy has hit zero; a depleted UAV stops accepting and
// processing tasks.
bool node_depleted(ComputeNode& node, double now);

struct ProcessingLogEntry {
  int node = 0;
  double processing_seconds = 0;
};

// Audit for the drain model: recompute consumed energy from the completion log
// and compare with the node's accumulator at `final_clock` (1e-9 relative).
bool total_energy_identity_check(const ComputeNode& node,
                                 std::span<const ProcessingLogEntry> log,
                                 double final_clock);

// Base per-hop delays; transmissions apply uniform multiplicative jitter via a
// per-task factor u in [-1, 1]: base * (1 + jitter_fraction * u).
struct LinkDelayModel {
  double iot_uav_delay = 0.05;
  double uav_uav_delay = 0.05;
  double uav_mec_delay = 0.1;
  double jitter_fraction = 0.1;

  void validate() const;

  // Zero for a node to itself; any hop touching a MEC uses uav_mec_delay.
  double base_between(int a, NodeRole a_role, int b, NodeRole b_role) const {
    if (a == b && a_role == b_role) return 0.0;
    if (a_role == NodeRole::Mec || b_role == NodeRole::Mec) return uav_mec_delay;
    return uav_uav_delay;
  }

  double jittered(double base, double u) const { return base * (1.0 + jitter_fraction * u); }
};

struct ScenarioConfig {
  int num_iot = 0;
  int num_uav = 0;
  int num_mec = 0;
  std::vector<TaskType> task_types;
  double sim_duration = 0;
  std::vector<int> iot_assignment;        // device index -> receiving UAV
  LinkDelayModel link_delays;
  std::vector<EnergyProfile> energy_profiles;  // one per UAV
  std::uint64_t rng_seed = 1;
  double seconds_per_hour = 3600.0;

  int num_nodes() const { return num_uav + num_mec; }
  NodeRole role_of(int node) const { return node < num_uav ? NodeRole::Uav : NodeRole::Mec; }

  // Default association: contiguous index blocks, num_iot/num_uav devices per UAV.
  static std::vector<int> block_assignment(int num_iot, int num_uav);

  void validate() const;
};

}  // namespace riskfleet
