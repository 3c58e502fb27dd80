#include "riskfleet/simcore.hpp"

#include <algorithm>
#include <tuple>
#include <utility>

namespace riskfleet {

std::vector<Task> generate_arrivals(const ScenarioConfig& cfg, Rng& rng) {
  struct Raw {
    Task task;
    int stream = 0;
    int index = 0;
  };
  std::vector<Raw> raw;
  int stream = 0;
  for (int dev = 0; dev < cfg.num_iot; ++dev) {
    for (std::size_t ty = 0; ty < cfg.task_types.size(); ++ty, ++stream) {
      const TaskType& type = cfg.task_types[ty];
      double t = 0;
      int index = 0;
      while (true) {
        t += rng.exponential(type.mean_interarrival);
        if (t >= cfg.sim_duration) break;
        Task task;
        task.id.receiver_uav = cfg.iot_assignment[dev];
        task.id.generated_at = t;
        task.type = static_cast<int>(ty);
        task.origin_iot = dev;
        task.created_at = t;
        task.iot_jitter_u = rng.uniform(-1.0, 1.0);
        task.relay_jitter_u = rng.uniform(-1.0, 1.0);
        raw.push_back(Raw{std::move(task), stream, index++});
      }
    }
  }
  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    return std::tie(a.task.created_at, a.stream, a.index) <
           std::tie(b.task.created_at, b.stream, b.index);
  });
  std::vector<Task> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i].task.id.seq = i;
    out.push_back(std::move(raw[i].task));
  }
  return out;
}

double node_backlog_seconds(const ComputeNode& node, double now,
                            const std::vector<Task>& tasks,
                            const std::vector<TaskType>& types) {
  double backlog = 0;
  if (node.busy_task != -1) backlog += std::max(0.0, node.busy_until - now);
  for (int idx : node.queue) {
    const TaskType& type = types[static_cast<std::size_t>(tasks[static_cast<std::size_t>(idx)].type)];
    backlog += node.is_uav() ? type.proc_time_uav : type.proc_time_mec;
  }
  return backlog;
}

SimulationRun::SimulationRun(const ScenarioConfig& cfg, OffloadingPolicy& policy, Rng env_rng)
    : cfg_(cfg), policy_(policy), rng_(env_rng) {
  cfg_.validate();
  for (int j = 0; j < cfg_.num_uav; ++j) {
    ComputeNode node;
    node.id = j;
    node.role = NodeRole::Uav;
    node.energy = cfg_.energy_profiles[static_cast<std::size_t>(j)];
    node.seconds_per_hour = cfg_.seconds_per_hour;
    nodes_.push_back(std::move(node));
  }
  for (int m = 0; m < cfg_.num_mec; ++m) {
    ComputeNode node;
    node.id = cfg_.num_uav + m;
    node.role = NodeRole::Mec;
    nodes_.push_back(std::move(node));
  }
  start_pending_.assign(nodes_.size(), false);
}

std::vector<double> SimulationRun::uav_energy_snapshot(double now) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cfg_.num_uav));
  for (int j = 0; j < cfg_.num_uav; ++j) out.push_back(remaining_energy(nodes_[static_cast<std::size_t>(j)], now));
  return out;
}

NodeSnapshot SimulationRun::make_snapshot(double now) {
  NodeSnapshot snap;
  snap.cpu_delays.reserve(nodes_.size());
  for (const ComputeNode& node : nodes_)
    snap.cpu_delays.push_back(node_backlog_seconds(node, now, tasks_, cfg_.task_types));
  snap.battery_levels = uav_energy_snapshot(now);
  snap.feasible.reserve(nodes_.size());
  for (ComputeNode& node : nodes_)
    snap.feasible.push_back(node.is_uav() ? !node_depleted(node, now) : true);
  return snap;
}

void SimulationRun::finish(int task_idx, double now, TaskResolution resolution) {
  Task& task = tasks_[static_cast<std::size_t>(task_idx)];
  expect(task.resolution == TaskResolution::Pending, "task resolved twice");
  task.resolution = resolution;
  task.completed_at = now;
  const TaskType& type = cfg_.task_types[static_cast<std::size_t>(task.type)];
  task.violated = (resolution == TaskResolution::ViolatedByDepletion)
                      ? true
                      : task.delay.total() > type.deadline;

  CompletionRecord rec;
  rec.task_seq = task.id.seq;
  rec.receiver = task.id.receiver_uav;
  rec.type = task.type;
  rec.destination = task.destination.value_or(-1);
  rec.completed_at = now;
  rec.delay = task.delay;
  rec.violated = *task.violated;
  rec.resolution = resolution;
  rec.dest_mean_uplink_at_enqueue = task.dest_mean_uplink_at_enqueue;
  rec.uav_energy = uav_energy_snapshot(now);
  rec.decision_index = decision_of_task_[static_cast<std::size_t>(task_idx)];
  trace_.completions.push_back(std::move(rec));

  if (trace_.completions.back().decision_index != kNoDecision) {
    policy_.on_completion(TransitionContext{
        trace_.decisions[trace_.completions.back().decision_index],
        trace_.completions.back(), cfg_});
  }
}

void SimulationRun::drain_queue_depleted(int node_id, double now) {
  ComputeNode& node = nodes_[static_cast<std::size_t>(node_id)];
  while (!node.queue.empty()) {
    const int idx = node.queue.front();
    node.queue.pop_front();
    Task& task = tasks_[static_cast<std::size_t>(idx)];
    task.delay.queue_wait = now - task.dest_arrival_at;
    finish(idx, now, TaskResolution::ViolatedByDepletion);
  }
}

void SimulationRun::schedule_start_if_idle(int node_id, double now) {
  ComputeNode& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.busy_task != -1 || start_pending_[static_cast<std::size_t>(node_id)] || node.queue.empty())
    return;
  const int head = node.queue.front();
  events_.push(Event{now, EventKind::TaskStartProcessing, tasks_[static_cast<std::size_t>(head)].id.seq, head});
  start_pending_[static_cast<std::size_t>(node_id)] = true;
}

void SimulationRun::handle_arrival_at_uav(const Event& ev) {
  Task& task = tasks_[static_cast<std::size_t>(ev.task)];
  const double now = ev.at;
  ComputeNode& receiver = nodes_[static_cast<std::size_t>(task.id.receiver_uav)];
  if (node_depleted(receiver, now)) {
    // The receiving agent is dead; the task was in flight to it and is lost.
    finish(ev.task, now, TaskResolution::ViolatedByDepletion);
    return;
  }

  NodeSnapshot snapshot = make_snapshot(now);
  const DecisionContext ctx{ev.task, task.id.seq, task.id.receiver_uav, task.type, now,
                            snapshot, cfg_};
  const int action = policy_.decide(ctx);
  expect(action >= 0 && action < cfg_.num_nodes(), "policy chose a node outside J+");

  DecisionRecord rec;
  rec.task_seq = task.id.seq;
  rec.receiver = task.id.receiver_uav;
  rec.type = task.type;
  rec.origin_iot = task.origin_iot;
  rec.created_at = task.created_at;
  rec.decided_at = now;
  rec.action = action;
  rec.iot_to_uav = task.delay.iot_to_uav;
  rec.snapshot = std::move(snapshot);
  decision_of_task_[static_cast<std::size_t>(ev.task)] = trace_.decisions.size();
  trace_.decisions.push_back(std::move(rec));

  task.destination = action;
  double relay = 0;
  if (action != task.id.receiver_uav) {
    const double base = cfg_.link_delays.base_between(task.id.receiver_uav, NodeRole::Uav,
                                                      action, cfg_.role_of(action));
    relay = cfg_.link_delays.jittered(base, task.relay_jitter_u);
  }
  task.delay.relay = relay;
  events_.push(Event{now + relay, EventKind::TaskArrivalAtDestination, task.id.seq, ev.task});
}

void SimulationRun::handle_arrival_at_destination(const Event& ev) {
  Task& task = tasks_[static_cast<std::size_t>(ev.task)];
  const double now = ev.at;
  ComputeNode& node = nodes_[static_cast<std::size_t>(*task.destination)];
  task.dest_arrival_at = now;
  task.dest_mean_uplink_at_enqueue = node.mean_completed_delay();
  if (node.is_uav() && node_depleted(node, now)) {
    finish(ev.task, now, TaskResolution::ViolatedByDepletion);
    return;
  }
  node.queue.push_back(ev.task);
  schedule_start_if_idle(node.id, now);
}

void SimulationRun::handle_start_processing(const Event& ev) {
  Task& task = tasks_[static_cast<std::size_t>(ev.task)];
  const double now = ev.at;
  ComputeNode& node = nodes_[static_cast<std::size_t>(*task.destination)];
  start_pending_[static_cast<std::size_t>(node.id)] = false;
  if (node.is_uav() && node_depleted(node, now)) {
    drain_queue_depleted(node.id, now);
    return;
  }
  expect(node.busy_task == -1, "start event on a busy node");
  expect(!node.queue.empty() && node.queue.front() == ev.task, "start event out of FIFO order");
  node.queue.pop_front();
  task.delay.queue_wait = now - task.dest_arrival_at;
  const TaskType& type = cfg_.task_types[static_cast<std::size_t>(task.type)];
  const double proc = node.is_uav() ? type.proc_time_uav : type.proc_time_mec;
  task.delay.processing = proc;
  node.busy_task = ev.task;
  node.busy_until = now + proc;
  events_.push(Event{now + proc, EventKind::TaskCompleted, task.id.seq, ev.task});
}

void SimulationRun::handle_completed(const Event& ev) {
  Task& task = tasks_[static_cast<std::size_t>(ev.task)];
  const double now = ev.at;
  ComputeNode& node = nodes_[static_cast<std::size_t>(*task.destination)];
  expect(node.busy_task == ev.task, "completion for a task the node is not running");
  node.busy_task = -1;
  if (node.is_uav() && node_depleted(node, now)) {
    // Battery ran out mid-computation; the result never materializes.
    finish(ev.task, now, TaskResolution::ViolatedByDepletion);
    drain_queue_depleted(node.id, now);
    return;
  }
  node.cpu_active_seconds += task.delay.processing;
  node.completed_count += 1;
  node.completed_delay_sum += task.delay.total();
  finish(ev.task, now, TaskResolution::Completed);
  if (node.is_uav() && node_depleted(node, now)) {
    drain_queue_depleted(node.id, now);
  } else {
    schedule_start_if_idle(node.id, now);
  }
}

Trace SimulationRun::run() {
  tasks_ = generate_arrivals(cfg_, rng_);
  trace_.num_uav = cfg_.num_uav;
  trace_.num_mec = cfg_.num_mec;
  trace_.num_types = static_cast<int>(cfg_.task_types.size());
  trace_.generated = tasks_.size();
  decision_of_task_.assign(tasks_.size(), kNoDecision);

  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    Task& task = tasks_[i];
    task.delay.iot_to_uav =
        cfg_.link_delays.jittered(cfg_.link_delays.iot_uav_delay, task.iot_jitter_u);
    events_.push(Event{task.created_at + task.delay.iot_to_uav, EventKind::TaskArrivalAtUav,
                       task.id.seq, static_cast<int>(i)});
  }
  events_.push(Event{cfg_.sim_duration, EventKind::SimEnd,
                     std::numeric_limits<std::uint64_t>::max(), -1});

  double clock = 0;
  while (!events_.empty()) {
    const Event ev = events_.top();
    events_.pop();
    expect(ev.at >= clock, "event queue went backwards in time");
    clock = ev.at;
    switch (ev.kind) {
      case EventKind::TaskCompleted: handle_completed(ev); break;
      case EventKind::TaskStartProcessing: handle_start_processing(ev); break;
      case EventKind::TaskArrivalAtDestination: handle_arrival_at_destination(ev); break;
      case EventKind::TaskArrivalAtUav: handle_arrival_at_uav(ev); break;
      case EventKind::SimEnd: break;
    }
  }

  trace_.final_clock = std::max(clock, cfg_.sim_duration);
  for (const Task& task : tasks_)
    expect(task.resolution != TaskResolution::Pending, "task left unresolved at drain");
  expect(trace_.completions.size() == tasks_.size(), "task conservation broken");
  trace_.final_uav_energy = uav_energy_snapshot(trace_.final_clock);
  return std::move(trace_);
}

}  // namespace riskfleet
