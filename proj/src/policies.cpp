#include "riskfleet/policies.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

namespace riskfleet {

Vec ObservedState::encode() const {
  const std::size_t dim = task_type_onehot.size() + cpu_delays.size() + battery_levels.size() +
                          link_delays.size() + receiver_onehot.size();
  Vec out(static_cast<Eigen::Index>(dim));
  Eigen::Index i = 0;
  for (double v : task_type_onehot) out(i++) = v;
  for (double v : cpu_delays) out(i++) = v;
  for (double v : battery_levels) out(i++) = v;
  for (double v : link_delays) out(i++) = v;
  for (double v : receiver_onehot) out(i++) = v;
  expect(out.allFinite(), "observed state has non-finite entries");
  return out;
}

ObservedState ObservedState::decode(const Vec& encoded, int num_types, int num_uav, int num_mec) {
  expect(encoded.size() == observed_state_dim(num_types, num_uav, num_mec),
         "encoded state length mismatch");
  const int n = num_uav + num_mec;
  ObservedState s;
  Eigen::Index i = 0;
  auto take = [&](std::vector<double>& field, int count) {
    field.resize(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) field[static_cast<std::size_t>(k)] = encoded(i++);
  };
  take(s.task_type_onehot, num_types);
  take(s.cpu_delays, n);
  take(s.battery_levels, num_uav);
  take(s.link_delays, n * n);
  take(s.receiver_onehot, num_uav);
  return s;
}

double backlog_feature_unit(const ScenarioConfig& cfg) {
  double unit = 0;
  for (const TaskType& t : cfg.task_types) unit = std::max(unit, t.proc_time_uav);
  return unit > 0 ? unit : 1.0;
}

ObservedState make_observed_state(int type, int receiver, const NodeSnapshot& snapshot,
                                  const ScenarioConfig& cfg) {
  const int n = cfg.num_nodes();
  // Raw backlog seconds dwarf the one-hot features and, once trained negative,
  // park the hidden layer in a dead zone where every long queue looks alike.
  // Express delays in units of the heaviest UAV job and clamp: past two such
  // jobs a queue is simply "long", there is nothing left to discriminate.
  const double unit = backlog_feature_unit(cfg);
  const double cap = 2.0;
  ObservedState s;
  s.task_type_onehot.assign(cfg.task_types.size(), 0.0);
  s.task_type_onehot.at(static_cast<std::size_t>(type)) = 1.0;
  s.cpu_delays.reserve(snapshot.cpu_delays.size());
  for (double v : snapshot.cpu_delays) s.cpu_delays.push_back(std::min(v / unit, cap));
  s.battery_levels = snapshot.battery_levels;
  s.link_delays.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      s.link_delays[static_cast<std::size_t>(a * n + b)] =
          cfg.link_delays.base_between(a, cfg.role_of(a), b, cfg.role_of(b)) / unit;
  s.receiver_onehot.assign(static_cast<std::size_t>(cfg.num_uav), 0.0);
  s.receiver_onehot.at(static_cast<std::size_t>(receiver)) = 1.0;
  return s;
}

ObservedState make_observed_state(const DecisionContext& ctx) {
  return make_observed_state(ctx.type, ctx.receiver, ctx.snapshot, ctx.cfg);
}

int rr_decide(int prev, int num_nodes) {
  expect(num_nodes >= 1, "round robin needs at least one node");
  if (prev < 0) return 0;
  return (prev + 1) % num_nodes;
}

int qhef_decide(const NodeSnapshot& snapshot, int receiver, int num_uav) {
  const int n = static_cast<int>(snapshot.cpu_delays.size());
  double min_backlog = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j)
    if (snapshot.feasible[static_cast<std::size_t>(j)])
      min_backlog = std::min(min_backlog, snapshot.cpu_delays[static_cast<std::size_t>(j)]);

  auto level = [&](int j) {
    return j < num_uav ? snapshot.battery_levels[static_cast<std::size_t>(j)]
                       : std::numeric_limits<double>::infinity();
  };
  int winner = -1;
  for (int j = 0; j < n; ++j) {
    if (!snapshot.feasible[static_cast<std::size_t>(j)]) continue;
    if (snapshot.cpu_delays[static_cast<std::size_t>(j)] != min_backlog) continue;
    if (winner < 0 || level(j) > level(winner)) winner = j;
  }
  expect(winner >= 0, "no feasible node");
  return level(winner) > snapshot.battery_levels[static_cast<std::size_t>(receiver)] ? winner
                                                                                     : receiver;
}

void DqlRewardParams::validate() const {
  if (!(energy_threshold > 0)) throw ConfigError("energy_threshold must be > 0");
}

void DrsParams::validate() const {
  if (weight < 0 || weight > 1) throw ConfigError("drs weight must be in [0, 1]");
  if (!(delay_norm > 0)) throw ConfigError("drs delay_norm must be > 0");
}

int energy_tier(int action, const std::vector<double>& uav_levels, int num_uav, double threshold) {
  if (action >= num_uav) return 2;  // server-side compute spends no UAV battery
  double best = 0;
  for (int j = 0; j < num_uav; ++j) best = std::max(best, uav_levels[static_cast<std::size_t>(j)]);
  const double diff = uav_levels[static_cast<std::size_t>(action)] - best;
  if (diff >= -threshold) return 2;
  if (diff <= -2 * threshold) return 0;
  return 1;
}

bool counterfactual_violation(const DecisionRecord& decision, int dest, const ScenarioConfig& cfg) {
  const TaskType& type = cfg.task_types[static_cast<std::size_t>(decision.type)];
  if (std::isinf(type.deadline)) return false;
  double estimate = decision.iot_to_uav;
  if (dest != decision.receiver)
    estimate += cfg.link_delays.base_between(decision.receiver, NodeRole::Uav, dest,
                                             cfg.role_of(dest));
  estimate += decision.snapshot.cpu_delays[static_cast<std::size_t>(dest)];
  estimate += cfg.role_of(dest) == NodeRole::Uav ? type.proc_time_uav : type.proc_time_mec;
  return estimate > type.deadline;
}

double dql_violation_penalty(const DecisionRecord& decision, const ScenarioConfig& cfg,
                             const DqlRewardParams& params) {
  for (int m = cfg.num_uav; m < cfg.num_nodes(); ++m)
    if (!counterfactual_violation(decision, m, cfg)) return params.penalty_mec_avoidable;
  if (!counterfactual_violation(decision, decision.receiver, cfg))
    return params.penalty_local_avoidable;
  for (int j = 0; j < cfg.num_uav; ++j) {
    if (j == decision.receiver || j == decision.action) continue;
    if (!counterfactual_violation(decision, j, cfg)) return params.penalty_other_avoidable;
  }
  return params.penalty_inevitable;
}

double dql_reward(const TransitionContext& ctx, const DqlRewardParams& params) {
  const int tier = energy_tier(ctx.decision.action, ctx.decision.snapshot.battery_levels,
                               ctx.cfg.num_uav, params.energy_threshold);
  const double v = ctx.completion.violated ? 1.0 : 0.0;
  double reward = (tier - 1) + (1.0 - v);
  if (ctx.completion.violated) reward += dql_violation_penalty(ctx.decision, ctx.cfg, params);
  return reward;
}

std::pair<double, double> drs_reward_and_risk(const TransitionContext& ctx, const DrsParams& drs,
                                              const DqlRewardParams& penalties) {
  const int tier = energy_tier(ctx.completion.destination, ctx.completion.uav_energy,
                               ctx.cfg.num_uav, penalties.energy_threshold);
  const double reward = -(drs.weight * (tier - 1) -
                          (1.0 - drs.weight) / drs.delay_norm *
                              ctx.completion.dest_mean_uplink_at_enqueue);
  const double risk = ctx.completion.violated
                          ? -dql_violation_penalty(ctx.decision, ctx.cfg, penalties)
                          : -1.0;
  return {reward, risk};
}

int drs_decide(const Vec& reward_q, const Vec& risk_values, double risk_threshold,
               const std::vector<bool>& feasible) {
  expect(reward_q.size() == risk_values.size() &&
             reward_q.size() == static_cast<Eigen::Index>(feasible.size()),
         "drs_decide: size mismatch");
  int best = -1;
  for (Eigen::Index a = 0; a < reward_q.size(); ++a) {
    if (!feasible[static_cast<std::size_t>(a)] || risk_values(a) >= risk_threshold) continue;
    if (best < 0 || reward_q(a) > reward_q(best)) best = static_cast<int>(a);
  }
  if (best >= 0) return best;
  for (Eigen::Index a = 0; a < risk_values.size(); ++a) {
    if (!feasible[static_cast<std::size_t>(a)]) continue;
    if (best < 0 || risk_values(a) < risk_values(best)) best = static_cast<int>(a);
  }
  expect(best >= 0, "drs_decide: no feasible action");
  return best;
}

double rq_action_cost(const TransitionContext& ctx, const RiskParams& params) {
  const TaskType& type = ctx.cfg.task_types[static_cast<std::size_t>(ctx.completion.type)];
  const double delay = ctx.completion.resolution == TaskResolution::ViolatedByDepletion
                           ? 2.0 * type.deadline
                           : ctx.completion.delay.total();
  const double c_d = delay_cost(delay, type.deadline, type.is_fire, params);
  double c_e = 0;
  const int dest = ctx.completion.destination;
  if (dest >= 0 && dest < ctx.cfg.num_uav)
    c_e = energy_cost(ctx.completion.uav_energy[static_cast<std::size_t>(dest)], params);
  return total_cost(c_e, c_d, params);
}

void rq_record_cost(AgentRiskState& agent, double cost, const RiskParams& params) {
  agent.eta_before = risk_measure(agent.ledger, params);
  agent.ledger.add(cost);
  agent.eta_after = risk_measure(agent.ledger, params);
  agent.has_pair = true;
}

double rq_reward(std::span<const AgentRiskState> agents, int actor, const RiskParams& params) {
  expect(actor >= 0 && actor < static_cast<int>(agents.size()), "actor index out of range");
  const AgentRiskState& acting = agents[static_cast<std::size_t>(actor)];
  expect(acting.has_pair, "acting agent has no before/after pair");
  const int rv_c = reward_value(acting.eta_after, acting.eta_before);

  int worst = 0;
  for (int j = 1; j < static_cast<int>(agents.size()); ++j)
    if (agents[static_cast<std::size_t>(j)].current_eta() >
        agents[static_cast<std::size_t>(worst)].current_eta())
      worst = j;
  const AgentRiskState& w = agents[static_cast<std::size_t>(worst)];
  const int rv_m = w.has_pair ? reward_value(w.eta_after, w.eta_before) : rv_c;
  return (1.0 - params.beta) * rv_c + params.beta * rv_m;
}

LearningPolicyBase::LearningPolicyBase(std::string name, const ScenarioConfig& cfg,
                                       TrainConfig train, std::vector<std::string> head_names,
                                       std::uint64_t master_seed)
    : name_(std::move(name)),
      cfg_(cfg),
      train_(std::move(train)),
      head_names_(std::move(head_names)),
      explore_rng_(Rng::derive(master_seed, {Rng::tag("explore"), Rng::tag(name_)})),
      replay_rng_(Rng::derive(master_seed, {Rng::tag("replay"), Rng::tag(name_)})) {
  cfg_.validate();
  train_.validate();
  state_dim_ = observed_state_dim(static_cast<int>(cfg_.task_types.size()), cfg_.num_uav,
                                  cfg_.num_mec);
  std::vector<int> sizes;
  sizes.push_back(state_dim_);
  for (int h : train_.hidden_sizes) sizes.push_back(h);
  sizes.push_back(cfg_.num_nodes());

  for (int agent = 0; agent < cfg_.num_uav; ++agent) {
    AgentLearner learner;
    for (std::size_t h = 0; h < head_names_.size(); ++h) {
      Rng init(Rng::derive(master_seed, {Rng::tag("init"), Rng::tag(name_),
                                         static_cast<std::uint64_t>(agent),
                                         static_cast<std::uint64_t>(h)}));
      QNetwork net(sizes, init);
      learner.heads.push_back(Head{net, net, ReplayBuffer(train_.replay_capacity), 0});
    }
    agents_.push_back(std::move(learner));
  }
  pending_.resize(agents_.size());
  episode_reward_accum_.assign(agents_.size(), 0.0);
  last_episode_rewards_.assign(agents_.size(), 0.0);
}

QNetwork& LearningPolicyBase::net(int agent, int head) {
  return agents_.at(static_cast<std::size_t>(agent)).heads.at(static_cast<std::size_t>(head)).net;
}

const QNetwork& LearningPolicyBase::net(int agent, int head) const {
  return agents_.at(static_cast<std::size_t>(agent)).heads.at(static_cast<std::size_t>(head)).net;
}

ReplayBuffer& LearningPolicyBase::replay(int agent, int head) {
  return agents_.at(static_cast<std::size_t>(agent)).heads.at(static_cast<std::size_t>(head)).replay;
}

void LearningPolicyBase::begin_episode(int) {
  for (auto& list : pending_) list.clear();
  pending_by_task_.clear();
  std::fill(episode_reward_accum_.begin(), episode_reward_accum_.end(), 0.0);
  on_episode_start();
}

int LearningPolicyBase::decide(const DecisionContext& ctx) {
  Vec state = make_observed_state(ctx).encode();
  const int action = choose(state, ctx.receiver, ctx.snapshot.feasible);
  inject_decision(ctx.receiver, std::move(state), action, ctx.task_seq);
  return action;
}

void LearningPolicyBase::inject_decision(int agent, Vec state, int action,
                                         std::uint64_t task_seq) {
  expect(agent >= 0 && agent < num_agents(), "agent index out of range");
  auto& list = pending_[static_cast<std::size_t>(agent)];
  pending_by_task_.emplace(task_seq, std::make_pair(agent, list.size()));
  list.push_back(Pending{std::move(state), action, {}, false});
}

void LearningPolicyBase::on_completion(const TransitionContext& ctx) {
  const auto it = pending_by_task_.find(ctx.completion.task_seq);
  expect(it != pending_by_task_.end(), "completion for an unknown decision");
  Pending& slot = pending_[static_cast<std::size_t>(it->second.first)][it->second.second];
  expect(!slot.rewarded, "completion delivered twice");
  slot.rewards = compute_rewards(ctx);
  expect(static_cast<int>(slot.rewards.size()) == num_heads(), "reward count mismatch");
  slot.rewarded = true;
  episode_reward_accum_[static_cast<std::size_t>(it->second.first)] += slot.rewards[0];
}

void LearningPolicyBase::end_episode() {
  for (std::size_t agent = 0; agent < agents_.size(); ++agent) {
    auto& list = pending_[agent];
    for (std::size_t i = 0; i < list.size(); ++i) {
      expect(list[i].rewarded, "decision never saw its completion");
      const bool terminal = i + 1 == list.size();
      for (int h = 0; h < num_heads(); ++h) {
        Transition t;
        t.state = list[i].state;
        t.action = list[i].action;
        t.reward = list[i].rewards[static_cast<std::size_t>(h)];
        t.next_state = terminal ? Vec(Vec::Zero(state_dim_)) : list[i + 1].state;
        t.terminal = terminal;
        agents_[agent].heads[static_cast<std::size_t>(h)].replay.push(std::move(t));
      }
    }
    list.clear();
  }
  pending_by_task_.clear();
  last_episode_rewards_ = episode_reward_accum_;

  if (!training_) return;
  for (auto& learner : agents_) {
    for (Head& head : learner.heads) {
      for (int u = 0; u < train_.updates_per_episode; ++u) {
        if (head.replay.size() < static_cast<std::size_t>(train_.batch_size)) break;
        const auto batch = head.replay.sample(static_cast<std::size_t>(train_.batch_size),
                                              replay_rng_);
        td_update(head.net, head.target, batch, train_);
        if (++head.sync_counter % static_cast<std::uint64_t>(train_.target_sync_interval) == 0)
          head.target = head.net;
      }
    }
  }
}

std::string LearningPolicyBase::checkpoint_file(const std::string& prefix, int agent,
                                                const std::string& head) {
  std::string name = prefix + "_agent" + std::to_string(agent);
  if (!head.empty()) name += "_" + head;
  return name + ".qnet";
}

void LearningPolicyBase::save_checkpoints(const std::string& dir,
                                          const std::string& prefix) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (int agent = 0; agent < num_agents(); ++agent)
    for (int h = 0; h < num_heads(); ++h) {
      const fs::path path = fs::path(dir) / checkpoint_file(prefix, agent,
                                                            head_names_[static_cast<std::size_t>(h)]);
      net(agent, h).save(path.string());
    }
}

void LearningPolicyBase::load_checkpoints(const std::string& dir, const std::string& prefix) {
  namespace fs = std::filesystem;
  for (int agent = 0; agent < num_agents(); ++agent)
    for (int h = 0; h < num_heads(); ++h) {
      const fs::path path = fs::path(dir) / checkpoint_file(prefix, agent,
                                                            head_names_[static_cast<std::size_t>(h)]);
      QNetwork loaded = QNetwork::load(path.string());
      Head& head = agents_[static_cast<std::size_t>(agent)].heads[static_cast<std::size_t>(h)];
      if (!loaded.same_shape(head.net))
        throw ConfigError("checkpoint shape mismatch: " + path.string());
      head.net = loaded;
      head.target = std::move(loaded);
    }
}

DqlPolicy::DqlPolicy(const ScenarioConfig& cfg, TrainConfig train, DqlRewardParams params,
                     std::uint64_t master_seed)
    : LearningPolicyBase("dql", cfg, std::move(train), {""}, master_seed), params_(params) {
  params_.validate();
}

int DqlPolicy::choose(const Vec& state, int agent, const std::vector<bool>& feasible) {
  return select_action(net(agent), state, epsilon(), explore_rng(), feasible);
}

std::vector<double> DqlPolicy::compute_rewards(const TransitionContext& ctx) {
  return {dql_reward(ctx, params_)};
}

DrsPolicy::DrsPolicy(const ScenarioConfig& cfg, TrainConfig train, DrsParams drs,
                     DqlRewardParams penalties, std::uint64_t master_seed)
    : LearningPolicyBase("drs", cfg, std::move(train), {"reward", "risk"}, master_seed),
      drs_(drs),
      penalties_(penalties) {
  drs_.validate();
  penalties_.validate();
}

int DrsPolicy::choose(const Vec& state, int agent, const std::vector<bool>& feasible) {
  if (explore_rng().uniform01() < epsilon()) {
    std::vector<int> open;
    for (std::size_t i = 0; i < feasible.size(); ++i)
      if (feasible[i]) open.push_back(static_cast<int>(i));
    expect(!open.empty(), "no feasible action");
    return open[explore_rng().uniform_index(open.size())];
  }
  const Vec reward_q = net(agent, 0).forward(state);
  // The risk head is trained on negated risk costs, so predictions flip back.
  const Vec risk_values = -net(agent, 1).forward(state);
  return drs_decide(reward_q, risk_values, drs_.risk_threshold, feasible);
}

std::vector<double> DrsPolicy::compute_rewards(const TransitionContext& ctx) {
  const auto [reward, risk] = drs_reward_and_risk(ctx, drs_, penalties_);
  return {reward, -risk};
}

RqPolicy::RqPolicy(const ScenarioConfig& cfg, TrainConfig train, RiskParams risk,
                   std::uint64_t master_seed)
    : LearningPolicyBase("rq", cfg, std::move(train), {""}, master_seed), risk_(risk) {
  risk_.validate();
  risk_states_.resize(static_cast<std::size_t>(num_agents()));
}

const AgentRiskState& RqPolicy::agent_risk(int agent) const {
  return risk_states_.at(static_cast<std::size_t>(agent));
}

void RqPolicy::on_episode_start() {
  for (AgentRiskState& s : risk_states_) s.reset();
}

int RqPolicy::choose(const Vec& state, int agent, const std::vector<bool>& feasible) {
  return select_action(net(agent), state, epsilon(), explore_rng(), feasible);
}

std::vector<double> RqPolicy::compute_rewards(const TransitionContext& ctx) {
  const int actor = ctx.decision.receiver;
  const double cost = rq_action_cost(ctx, risk_);
  rq_record_cost(risk_states_[static_cast<std::size_t>(actor)], cost, risk_);
  return {rq_reward(risk_states_, actor, risk_)};
}

}  // namespace riskfleet
