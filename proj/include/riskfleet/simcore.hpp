#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "riskfleet/model.hpp"
#include "riskfleet/rng.hpp"

namespace riskfleet {

// Rank doubles as the same-instant tie-break: completions free a CPU before the
// freed slot is claimed, destination arrivals join queues before new tasks are
// decided, and the end marker always goes last.
enum class EventKind {
  TaskCompleted = 0,
  TaskStartProcessing = 1,
  TaskArrivalAtDestination = 2,
  TaskArrivalAtUav = 3,
  SimEnd = 4,
};

struct Event {
  double at = 0;
  EventKind kind = EventKind::SimEnd;
  std::uint64_t task_seq = std::numeric_limits<std::uint64_t>::max();
  int task = -1;  // index into the run's task table, -1 for SimEnd
};

// Total order (at, kind, task_seq); the event set never holds two entries with
// the same triple.
struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.at != b.at) return a.at > b.at;
    if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
    return a.task_seq > b.task_seq;
  }
};

// What a policy may observe when a task reaches its receiving UAV. cpu_delays
// is each node's backlog estimate: residual of the running task plus the
// processing time of everything queued, at that node's own speed.
struct NodeSnapshot {
  std::vector<double> cpu_delays;     // one per node in J+
  std::vector<double> battery_levels; // one per UAV, fraction of capacity
  std::vector<bool> feasible;         // false for depleted UAVs
};

struct DecisionContext {
  int task = -1;
  std::uint64_t task_seq = 0;
  int receiver = -1;
  int type = 0;
  double now = 0;
  const NodeSnapshot& snapshot;
  const ScenarioConfig& cfg;
};

struct DecisionRecord {
  std::uint64_t task_seq = 0;
  int receiver = -1;
  int type = 0;
  int origin_iot = -1;
  double created_at = 0;
  double decided_at = 0;
  int action = -1;
  double iot_to_uav = 0;  // realized first-hop delay of this task
  NodeSnapshot snapshot;  // decision-time view
};

inline constexpr std::size_t kNoDecision = std::numeric_limits<std::size_t>::max();

struct CompletionRecord {
  std::uint64_t task_seq = 0;
  int receiver = -1;
  int type = 0;
  int destination = -1;
  double completed_at = 0;
  DelayBreakdown delay;
  bool violated = false;
  TaskResolution resolution = TaskResolution::Completed;
  double dest_mean_uplink_at_enqueue = 0;
  std::vector<double> uav_energy;  // per-UAV remaining fraction at this instant
  std::size_t decision_index = kNoDecision;
};

// Handed to policies when a decided task finishes (or dies with a depleted
// destination). Everything a retrospective reward needs is in the two records.
struct TransitionContext {
  const DecisionRecord& decision;
  const CompletionRecord& completion;
  const ScenarioConfig& cfg;
};

class OffloadingPolicy {
 public:
  virtual ~OffloadingPolicy() = default;
  virtual const char* name() const = 0;
  virtual int decide(const DecisionContext& ctx) = 0;
  virtual void on_completion(const TransitionContext&) {}
  virtual void begin_episode(int /*episode*/) {}
  virtual void end_episode() {}
};

// Test shim: forwards decide to a callable.
template <typename F>
class CallbackPolicy final : public OffloadingPolicy {
 public:
  explicit CallbackPolicy(F fn) : fn_(std::move(fn)) {}
  const char* name() const override { return "callback"; }
  int decide(const DecisionContext& ctx) override { return fn_(ctx); }

 private:
  F fn_;
};

template <typename F>
CallbackPolicy<F> make_callback_policy(F fn) {
  return CallbackPolicy<F>(std::move(fn));
}

struct Trace {
  int num_uav = 0;
  int num_mec = 0;
  int num_types = 0;
  std::vector<DecisionRecord> decisions;
  std::vector<CompletionRecord> completions;  // completion order
  std::uint64_t generated = 0;
  double final_clock = 0;
  std::vector<double> final_uav_energy;
};

// One arrival stream per (device, type) pair: exponential gaps, arrivals kept
// while strictly before sim_duration, jitter factors pre-drawn alongside each
// gap. The merged list is sorted by time and re-sequenced globally.
std::vector<Task> generate_arrivals(const ScenarioConfig& cfg, Rng& rng);

double node_backlog_seconds(const ComputeNode& node, double now,
                            const std::vector<Task>& tasks,
                            const std::vector<TaskType>& types);

// One episode: builds nodes, generates arrivals, and drives the event loop
// until every task is resolved. Events past sim_duration still run so queues
// drain; SimEnd only pins the clock for the final energy reading.
class SimulationRun {
 public:
  SimulationRun(const ScenarioConfig& cfg, OffloadingPolicy& policy, Rng env_rng);

  Trace run();

 private:
  void handle_arrival_at_uav(const Event& ev);
  void handle_arrival_at_destination(const Event& ev);
  void handle_start_processing(const Event& ev);
  void handle_completed(const Event& ev);

  NodeSnapshot make_snapshot(double now);
  void schedule_start_if_idle(int node_id, double now);
  void resolve_depleted(int task_idx, double now);
  void drain_queue_depleted(int node_id, double now);
  void finish(int task_idx, double now, TaskResolution resolution);
  std::vector<double> uav_energy_snapshot(double now);

  const ScenarioConfig& cfg_;
  OffloadingPolicy& policy_;
  Rng rng_;
  std::vector<Task> tasks_;
  std::vector<ComputeNode> nodes_;
  std::vector<bool> start_pending_;
  std::vector<std::size_t> decision_of_task_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  Trace trace_;
};

}  // namespace riskfleet
