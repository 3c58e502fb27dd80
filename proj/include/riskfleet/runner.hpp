#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "riskfleet/config.hpp"
#include "riskfleet/io.hpp"
#include "riskfleet/policies.hpp"

namespace riskfleet {

struct ExperimentPlan {
  std::string scenario_path;
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  int episodes = -1;            // overrides the scenario's episode budget when >= 0
  std::string out_dir;
  std::string checkpoint_dir;   // where eval finds trained weights
  std::string offline_dataset;  // record writes here; train reads it instead of live episodes
};

bool is_learning_policy(const std::string& name);

std::unique_ptr<OffloadingPolicy> make_policy(const std::string& name, const Settings& settings,
                                              std::uint64_t master_seed);

// Worker cap for independent (policy, seed) jobs; RISKFLEET_THREADS overrides
// the hardware count.
int worker_count();

struct TrainOutput {
  std::vector<std::vector<double>> episode_agent_rewards;  // [episode][agent]
};

// Live training: per-episode epsilon schedule over the actual budget, one
// simulated episode per step. Environment streams depend only on (seed,
// episode), never on the policy, so every policy faces identical workloads.
TrainOutput train_policy(LearningPolicyBase& policy, const Settings& settings,
                         std::uint64_t seed, int episodes);

// Replays recorded episodes through the policy's reward machinery instead of
// simulating; cycles through the dataset until the budget is spent.
TrainOutput train_policy_offline(LearningPolicyBase& policy, const Settings& settings,
                                 const RecordedDataset& dataset, int episodes);

// One greedy episode (epsilon 0, no weight updates for learning policies).
Trace eval_episode(OffloadingPolicy& policy, const Settings& settings, std::uint64_t seed);

// Locates "<policy>_seed<s>" checkpoints in dir, smallest seed wins.
std::string find_checkpoint_prefix(const std::string& dir, const std::string& policy);

void cmd_train(const ExperimentPlan& plan);
void cmd_eval(const ExperimentPlan& plan);
void cmd_record(const ExperimentPlan& plan);

}  // namespace riskfleet
