#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "riskfleet/model.hpp"
#include "riskfleet/neural.hpp"
#include "riskfleet/risk.hpp"
#include "riskfleet/simcore.hpp"

namespace riskfleet {

// Flat observation fed to the value networks: task type one-hot, per-node
// backlog, per-UAV battery fractions, the base link-delay matrix row-major,
// and the receiving UAV one-hot, concatenated in that order. Backlogs and
// link delays are normalized by the heaviest UAV processing time and the
// backlog entries are clamped at 2 so every feature stays O(1).
struct ObservedState {
  std::vector<double> task_type_onehot;  // K
  std::vector<double> cpu_delays;        // J + L, normalized
  std::vector<double> battery_levels;    // J
  std::vector<double> link_delays;       // (J+L)^2, zero diagonal, normalized
  std::vector<double> receiver_onehot;   // J

  Vec encode() const;
  static ObservedState decode(const Vec& encoded, int num_types, int num_uav, int num_mec);
};

// The normalizer shared by the backlog and link features (largest UAV
// processing time, 1.0 when the scenario has no task types).
double backlog_feature_unit(const ScenarioConfig& cfg);

constexpr int observed_state_dim(int num_types, int num_uav, int num_mec) {
  const int n = num_uav + num_mec;
  return num_types + n + num_uav + n * n + num_uav;
}

ObservedState make_observed_state(int type, int receiver, const NodeSnapshot& snapshot,
                                  const ScenarioConfig& cfg);
ObservedState make_observed_state(const DecisionContext& ctx);

// Cyclic successor; prev = -1 means no task has been assigned yet.
int rr_decide(int prev, int num_nodes);

class RoundRobinPolicy final : public OffloadingPolicy {
 public:
  const char* name() const override { return "rr"; }
  void begin_episode(int) override { prev_ = -1; }
  int decide(const DecisionContext& ctx) override {
    prev_ = rr_decide(prev_, ctx.cfg.num_nodes());
    return prev_;
  }

 private:
  int prev_ = -1;
};

// Lowest backlog first, then highest battery among the tied nodes (MEC counts
// as infinite battery), offload only if the winner beats the receiver's level.
int qhef_decide(const NodeSnapshot& snapshot, int receiver, int num_uav);

class QhefPolicy final : public OffloadingPolicy {
 public:
  const char* name() const override { return "qhef"; }
  int decide(const DecisionContext& ctx) override {
    return qhef_decide(ctx.snapshot, ctx.receiver, ctx.cfg.num_uav);
  }
};

struct DqlRewardParams {
  double energy_threshold = 0.01;  // battery fraction
  double penalty_mec_avoidable = -40;
  double penalty_local_avoidable = -20;
  double penalty_other_avoidable = -10;
  double penalty_inevitable = -1;

  void validate() const;
};

// 2 when the chosen node is within `threshold` of the best UAV battery (MEC
// always), 0 when more than twice the threshold below it, 1 in between.
int energy_tier(int action, const std::vector<double>& uav_levels, int num_uav, double threshold);

// Decision-time estimate of whether sending the task to `dest` would have
// missed its deadline: first hop + base relay + backlog + processing time.
bool counterfactual_violation(const DecisionRecord& decision, int dest, const ScenarioConfig& cfg);

// The avoidability cascade: MEC would have met the deadline, then local
// compute, then any other UAV, otherwise the violation was inevitable.
double dql_violation_penalty(const DecisionRecord& decision, const ScenarioConfig& cfg,
                             const DqlRewardParams& params);

double dql_reward(const TransitionContext& ctx, const DqlRewardParams& params);

struct DrsParams {
  double weight = 0.5;       // W, energy vs delay
  double delay_norm = 15.0;  // delay normalizer
  double risk_threshold = 0; // predicted risk must stay below this

  void validate() const;
};

// Returns (reward, risk cost). The risk cost is -1 on a safe outcome and the
// positive avoidability magnitude on a violation.
std::pair<double, double> drs_reward_and_risk(const TransitionContext& ctx,
                                              const DrsParams& drs,
                                              const DqlRewardParams& penalties);

// Among feasible actions with predicted risk below the threshold, take the
// highest reward-Q; if none qualify, take the lowest predicted risk.
int drs_decide(const Vec& reward_q, const Vec& risk_values, double risk_threshold,
               const std::vector<bool>& feasible);

struct AgentRiskState {
  RiskLedger ledger;
  double eta_before = 0;
  double eta_after = 0;
  bool has_pair = false;

  double current_eta() const { return has_pair ? eta_after : 0.0; }
  void reset() {
    ledger.clear();
    eta_before = eta_after = 0;
    has_pair = false;
  }
};

// Total cost of one concluded action: destination battery burn plus the signed
// deadline-distance cost. A task killed by a depleted node is costed at twice
// its deadline since it has no realized delay.
double rq_action_cost(const TransitionContext& ctx, const RiskParams& params);

void rq_record_cost(AgentRiskState& agent, double cost, const RiskParams& params);

// Mixes the acting agent's reward value with the worst-off (highest current
// eta) agent's; if that agent has no before/after pair yet the mixture
// collapses to the actor's value.
double rq_reward(std::span<const AgentRiskState> agents, int actor, const RiskParams& params);

// Shared scaffolding for the learning policies: per-agent value heads, pending
// decision bookkeeping, retrospective reward assignment, and the per-episode
// replay/update cycle. Rewards land when tasks finish, so transitions are
// assembled at episode end, chaining each agent's decisions in order.
class LearningPolicyBase : public OffloadingPolicy {
 public:
  const char* name() const override { return name_.c_str(); }
  void begin_episode(int episode) override;
  void end_episode() override;
  int decide(const DecisionContext& ctx) override;
  void on_completion(const TransitionContext& ctx) override;

  void set_epsilon(double eps) { epsilon_ = eps; }
  double epsilon() const { return epsilon_; }
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  int num_agents() const { return static_cast<int>(agents_.size()); }
  int num_heads() const { return static_cast<int>(head_names_.size()); }
  int state_dim() const { return state_dim_; }
  QNetwork& net(int agent, int head = 0);
  const QNetwork& net(int agent, int head = 0) const;
  ReplayBuffer& replay(int agent, int head = 0);
  const std::vector<double>& last_episode_rewards() const { return last_episode_rewards_; }
  const ScenarioConfig& scenario() const { return cfg_; }
  const TrainConfig& train_config() const { return train_; }

  static std::string checkpoint_file(const std::string& prefix, int agent,
                                     const std::string& head);
  void save_checkpoints(const std::string& dir, const std::string& prefix) const;
  void load_checkpoints(const std::string& dir, const std::string& prefix);

  // Offline path: replay a recorded decision without consulting the nets.
  void inject_decision(int agent, Vec state, int action, std::uint64_t task_seq);

 protected:
  LearningPolicyBase(std::string name, const ScenarioConfig& cfg, TrainConfig train,
                     std::vector<std::string> head_names, std::uint64_t master_seed);

  virtual int choose(const Vec& state, int agent, const std::vector<bool>& feasible) = 0;
  virtual std::vector<double> compute_rewards(const TransitionContext& ctx) = 0;
  virtual void on_episode_start() {}

  Rng& explore_rng() { return explore_rng_; }

 private:
  struct Head {
    QNetwork net;
    QNetwork target;
    ReplayBuffer replay;
    std::uint64_t sync_counter = 0;
  };
  struct AgentLearner {
    std::vector<Head> heads;
  };
  struct Pending {
    Vec state;
    int action = 0;
    std::vector<double> rewards;
    bool rewarded = false;
  };

  std::string name_;
  ScenarioConfig cfg_;
  TrainConfig train_;
  std::vector<std::string> head_names_;
  int state_dim_ = 0;
  std::vector<AgentLearner> agents_;
  std::vector<std::vector<Pending>> pending_;  // per agent, decision order
  std::unordered_map<std::uint64_t, std::pair<int, std::size_t>> pending_by_task_;
  Rng explore_rng_;
  Rng replay_rng_;
  double epsilon_ = 0;
  bool training_ = true;
  std::vector<double> episode_reward_accum_;
  std::vector<double> last_episode_rewards_;
};

class DqlPolicy final : public LearningPolicyBase {
 public:
  DqlPolicy(const ScenarioConfig& cfg, TrainConfig train, DqlRewardParams params,
            std::uint64_t master_seed);

 protected:
  int choose(const Vec& state, int agent, const std::vector<bool>& feasible) override;
  std::vector<double> compute_rewards(const TransitionContext& ctx) override;

 private:
  DqlRewardParams params_;
};

class DrsPolicy final : public LearningPolicyBase {
 public:
  DrsPolicy(const ScenarioConfig& cfg, TrainConfig train, DrsParams drs,
            DqlRewardParams penalties, std::uint64_t master_seed);

 protected:
  int choose(const Vec& state, int agent, const std::vector<bool>& feasible) override;
  std::vector<double> compute_rewards(const TransitionContext& ctx) override;

 private:
  DrsParams drs_;
  DqlRewardParams penalties_;
};

class RqPolicy final : public LearningPolicyBase {
 public:
  RqPolicy(const ScenarioConfig& cfg, TrainConfig train, RiskParams risk,
           std::uint64_t master_seed);

  const AgentRiskState& agent_risk(int agent) const;

 protected:
  int choose(const Vec& state, int agent, const std::vector<bool>& feasible) override;
  std::vector<double> compute_rewards(const TransitionContext& ctx) override;
  void on_episode_start() override;

 private:
  RiskParams risk_;
  std::vector<AgentRiskState> risk_states_;
};

}  // namespace riskfleet
