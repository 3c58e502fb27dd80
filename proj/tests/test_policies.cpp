#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <vector>

#include "riskfleet/policies.hpp"

using namespace riskfleet;

namespace {

EnergyProfile big_battery() {
  EnergyProfile p;
  p.battery_capacity = 570.0;
  p.hover_power = 211.0;
  p.antenna_power = 17.0;
  p.cpu_idle_power = 4320.0;
  p.cpu_active_power = 12960.0;
  return p;
}

TaskType make_type(TaskKind kind, double mean, double deadline, double uav, double mec,
                   bool fire = false) {
  TaskType t;
  t.kind = kind;
  t.mean_interarrival = mean;
  t.deadline = deadline;
  t.proc_time_uav = uav;
  t.proc_time_mec = mec;
  t.is_fire = fire;
  return t;
}

// Three workload classes, four agents, one server: the layout the full
// scenario file uses, handy for dimension checks.
ScenarioConfig farm_cfg() {
  ScenarioConfig cfg;
  cfg.num_iot = 16;
  cfg.num_uav = 4;
  cfg.num_mec = 1;
  cfg.sim_duration = 5.0;
  cfg.task_types = {
      make_type(TaskKind::FireDetection, 4.0, 1.0, 0.1, 0.05, true),
      make_type(TaskKind::PestDetection, 4.0, 2.0, 0.2, 0.1),
      make_type(TaskKind::GrowthMonitoring, 8.0, 15.0, 1.5, 0.75),
  };
  cfg.iot_assignment = ScenarioConfig::block_assignment(16, 4);
  cfg.energy_profiles = {big_battery(), big_battery(), big_battery(), big_battery()};
  return cfg;
}

// Two agents, one server, fire traffic only, no jitter: small enough that
// every reward term can be followed by hand.
ScenarioConfig duo_cfg() {
  ScenarioConfig cfg;
  cfg.num_iot = 2;
  cfg.num_uav = 2;
  cfg.num_mec = 1;
  cfg.sim_duration = 5.0;
  cfg.task_types = {make_type(TaskKind::FireDetection, 0.5, 1.0, 0.1, 0.05, true)};
  cfg.iot_assignment = {0, 1};
  cfg.energy_profiles = {big_battery(), big_battery()};
  cfg.link_delays.jitter_fraction = 0.0;
  return cfg;
}

RiskParams default_risk() {
  RiskParams p;
  p.energy_growth = 2.0;
  p.fire_growth = 8.0;
  p.other_growth = 1.0;
  p.energy_scale = 1.0;
  p.alpha_percent = 2.0;
  p.beta = 0.75;
  return p;
}

NodeSnapshot snapshot(std::vector<double> cpu, std::vector<double> battery,
                      std::vector<bool> feasible = {}) {
  NodeSnapshot s;
  s.cpu_delays = std::move(cpu);
  s.battery_levels = std::move(battery);
  s.feasible = feasible.empty() ? std::vector<bool>(s.cpu_delays.size(), true)
                                : std::move(feasible);
  return s;
}

DecisionRecord make_decision(const ScenarioConfig&, int receiver, int action,
                             NodeSnapshot snap, double iot_to_uav = 0.05, int type = 0) {
  DecisionRecord d;
  d.receiver = receiver;
  d.type = type;
  d.action = action;
  d.iot_to_uav = iot_to_uav;
  d.snapshot = std::move(snap);
  return d;
}

CompletionRecord make_completion(int destination, double total_delay, bool violated,
                                 std::vector<double> uav_energy,
                                 TaskResolution res = TaskResolution::Completed) {
  CompletionRecord c;
  c.type = 0;
  c.destination = destination;
  c.delay.queue_wait = total_delay;  // lump the whole delay into one component
  c.violated = violated;
  c.resolution = res;
  c.uav_energy = std::move(uav_energy);
  return c;
}

}  // namespace

TEST_CASE("observed state flattens to the documented layout and round-trips") {
  ScenarioConfig cfg = farm_cfg();
  CHECK(observed_state_dim(3, 4, 1) == 41);
  CHECK(backlog_feature_unit(cfg) == doctest::Approx(1.5));

  ScenarioConfig bare;
  CHECK(backlog_feature_unit(bare) == doctest::Approx(1.0));

  NodeSnapshot snap = snapshot({0.0, 0.75, 3.0, 4.5, 0.3},
                               {1.0, 0.9, 0.8, 0.7});
  const ObservedState s = make_observed_state(1, 2, snap, cfg);

  CHECK(s.task_type_onehot == std::vector<double>{0.0, 1.0, 0.0});
  // Backlogs in units of the heaviest job (1.5 s), clamped at two jobs.
  REQUIRE(s.cpu_delays.size() == 5);
  CHECK(s.cpu_delays[0] == doctest::Approx(0.0));
  CHECK(s.cpu_delays[1] == doctest::Approx(0.5));
  CHECK(s.cpu_delays[2] == doctest::Approx(2.0));
  CHECK(s.cpu_delays[3] == doctest::Approx(2.0));
  CHECK(s.cpu_delays[4] == doctest::Approx(0.2));
  CHECK(s.battery_levels == std::vector<double>{1.0, 0.9, 0.8, 0.7});
  REQUIRE(s.link_delays.size() == 25);
  CHECK(s.link_delays[0] == doctest::Approx(0.0));               // self hop
  CHECK(s.link_delays[1] == doctest::Approx(0.05 / 1.5));        // agent to agent
  CHECK(s.link_delays[4] == doctest::Approx(0.1 / 1.5));         // agent to server
  CHECK(s.link_delays[4 * 5 + 0] == doctest::Approx(0.1 / 1.5)); // server row
  CHECK(s.receiver_onehot == std::vector<double>{0.0, 0.0, 1.0, 0.0});

  const Vec encoded = s.encode();
  REQUIRE(encoded.size() == 41);
  const ObservedState back = ObservedState::decode(encoded, 3, 4, 1);
  CHECK(back.task_type_onehot == s.task_type_onehot);
  CHECK(back.cpu_delays == s.cpu_delays);
  CHECK(back.battery_levels == s.battery_levels);
  CHECK(back.link_delays == s.link_delays);
  CHECK(back.receiver_onehot == s.receiver_onehot);
}

TEST_CASE("round robin cycles through every node and restarts per episode") {
  CHECK(rr_decide(-1, 5) == 0);
  CHECK(rr_decide(0, 5) == 1);
  CHECK(rr_decide(3, 5) == 4);
  CHECK(rr_decide(4, 5) == 0);
  CHECK_THROWS_AS(rr_decide(0, 0), std::logic_error);

  ScenarioConfig cfg = duo_cfg();
  NodeSnapshot snap = snapshot({0, 0, 0}, {1, 1});
  RoundRobinPolicy rr;
  rr.begin_episode(0);
  std::vector<int> seen;
  for (int i = 0; i < 4; ++i) {
    DecisionContext ctx{0, static_cast<std::uint64_t>(i), 0, 0, 0.0, snap, cfg};
    seen.push_back(rr.decide(ctx));
  }
  CHECK(seen == std::vector<int>{0, 1, 2, 0});
  rr.begin_episode(1);
  DecisionContext ctx{0, 9, 0, 0, 0.0, snap, cfg};
  CHECK(rr.decide(ctx) == 0);
}

TEST_CASE("queue-health heuristic picks the emptiest node, charge breaks ties") {
  // The idle server wins outright: empty queue and effectively infinite charge.
  CHECK(qhef_decide(snapshot({0.5, 0.2, 0.0}, {0.9, 0.8}), 0, 2) == 2);

  // Backlog tie between agents goes to the healthier battery.
  CHECK(qhef_decide(snapshot({0.1, 0.3, 0.1, 0.5}, {0.5, 0.9, 0.8}), 0, 3) == 2);

  // The winner must beat the receiver's own level, otherwise stay local.
  CHECK(qhef_decide(snapshot({0.0, 0.0, 0.2}, {0.9, 0.3}), 0, 2) == 0);
  CHECK(qhef_decide(snapshot({0.0, 0.1, 0.2}, {0.3, 0.9}), 1, 2) == 1);
  CHECK(qhef_decide(snapshot({0.0, 0.1, 0.2}, {0.95, 0.9}), 1, 2) == 0);

  // Depleted nodes never win even with the shortest queue.
  CHECK(qhef_decide(snapshot({0.0, 0.2, 0.3}, {0.9, 0.8}, {false, true, true}), 1, 2) == 1);
}

TEST_CASE("energy tiers compare the chosen node against the fleet's best battery") {
  const std::vector<double> levels{0.955, 0.96, 0.935, 0.90};
  CHECK(energy_tier(1, levels, 4, 0.01) == 2);  // the best itself
  CHECK(energy_tier(0, levels, 4, 0.01) == 2);  // within one threshold
  CHECK(energy_tier(2, levels, 4, 0.01) == 0);  // over two thresholds behind
  CHECK(energy_tier(3, levels, 4, 0.01) == 0);
  CHECK(energy_tier(4, levels, 4, 0.01) == 2);  // server-side compute is free

  const std::vector<double> mid{0.945, 0.96};
  CHECK(energy_tier(0, mid, 2, 0.01) == 1);     // in the grey band between
}

TEST_CASE("the counterfactual check estimates a destination's end-to-end delay") {
  ScenarioConfig cfg = duo_cfg();
  DecisionRecord d = make_decision(cfg, 0, 0, snapshot({0.2, 1.5, 0.0}, {1, 1}));

  CHECK(!counterfactual_violation(d, 0, cfg));  // 0.05 + 0.2 + 0.1
  CHECK(counterfactual_violation(d, 1, cfg));   // 0.05 + 0.05 + 1.5 + 0.1
  CHECK(!counterfactual_violation(d, 2, cfg));  // 0.05 + 0.1 + 0.05

  // An unbounded deadline can never be missed.
  ScenarioConfig lax = cfg;
  lax.task_types[0].deadline = std::numeric_limits<double>::infinity();
  CHECK(!counterfactual_violation(d, 1, lax));
}

TEST_CASE("violation penalties follow the avoidability cascade") {
  ScenarioConfig cfg = duo_cfg();
  DqlRewardParams params;

  // The server had room: harshest penalty.
  DecisionRecord d = make_decision(cfg, 0, 1, snapshot({0.2, 1.5, 0.0}, {1, 1}));
  CHECK(dql_violation_penalty(d, cfg, params) == doctest::Approx(-40.0));

  // Server saturated but local compute would have made it.
  d = make_decision(cfg, 0, 1, snapshot({0.2, 1.5, 1.0}, {1, 1}));
  CHECK(dql_violation_penalty(d, cfg, params) == doctest::Approx(-20.0));

  // Only the other agent had room (the chosen action is excluded).
  d = make_decision(cfg, 0, 2, snapshot({1.5, 0.2, 1.0}, {1, 1}));
  CHECK(dql_violation_penalty(d, cfg, params) == doctest::Approx(-10.0));

  // Same queues, but the free agent was the one actually chosen: inevitable.
  d = make_decision(cfg, 0, 1, snapshot({1.5, 0.2, 1.0}, {1, 1}));
  CHECK(dql_violation_penalty(d, cfg, params) == doctest::Approx(-1.0));

  // Everything saturated: inevitable.
  d = make_decision(cfg, 0, 1, snapshot({1.5, 1.5, 1.0}, {1, 1}));
  CHECK(dql_violation_penalty(d, cfg, params) == doctest::Approx(-1.0));
}

TEST_CASE("deep value reward adds tier, timeliness, and the violation penalty") {
  ScenarioConfig cfg = duo_cfg();
  DqlRewardParams params;

  // On-time task on the best-charged agent.
  DecisionRecord d = make_decision(cfg, 0, 0, snapshot({0, 0, 0}, {0.96, 0.95}));
  CompletionRecord c = make_completion(0, 0.3, false, {0.96, 0.95});
  CHECK(dql_reward({d, c, cfg}, params) == doctest::Approx(2.0));

  // On-time but on a clearly weaker battery.
  d = make_decision(cfg, 0, 0, snapshot({0, 0, 0}, {0.90, 0.96}));
  CHECK(dql_reward({d, c, cfg}, params) == doctest::Approx(0.0));

  // Missed deadline the server would have caught: 1 + 0 - 40.
  d = make_decision(cfg, 0, 1, snapshot({0.2, 1.5, 0.0}, {0.96, 0.96}));
  CompletionRecord late = make_completion(1, 1.8, true, {0.96, 0.96});
  CHECK(dql_reward({d, late, cfg}, params) == doctest::Approx(-39.0));
}

TEST_CASE("risk-sensitive reward trades battery tier against the destination's record") {
  ScenarioConfig cfg = duo_cfg();
  DrsParams drs;
  DqlRewardParams penalties;

  DecisionRecord d = make_decision(cfg, 0, 0, snapshot({0, 0, 0}, {1, 1}));
  CompletionRecord c = make_completion(0, 0.3, false, {0.90, 0.96});
  c.dest_mean_uplink_at_enqueue = 0.3;
  // Tier 0 at completion time: reward = -(0.5 * -1 - (0.5 / 15) * 0.3).
  auto [reward, risk] = drs_reward_and_risk({d, c, cfg}, drs, penalties);
  CHECK(reward == doctest::Approx(0.51).epsilon(1e-12));
  CHECK(risk == doctest::Approx(-1.0));

  // A violation surfaces the (positive) avoidability magnitude as risk.
  DecisionRecord bad = make_decision(cfg, 0, 1, snapshot({0.2, 1.5, 0.0}, {1, 1}));
  CompletionRecord late = make_completion(1, 1.8, true, {0.96, 0.96});
  late.dest_mean_uplink_at_enqueue = 0.0;
  auto [late_reward, late_risk] = drs_reward_and_risk({bad, late, cfg}, drs, penalties);
  CHECK(late_risk == doctest::Approx(40.0));
  CHECK(late_reward == doctest::Approx(-0.5));  // tier 2 at completion
}

TEST_CASE("risk-gated argmax prefers safe actions and falls back to least risk") {
  Vec reward_q(3), risk(3);
  reward_q << 1.0, 5.0, 3.0;
  risk << -2.0, 0.5, -1.0;
  CHECK(drs_decide(reward_q, risk, 0.0, {true, true, true}) == 2);

  // Best-rewarded safe action is masked out.
  CHECK(drs_decide(reward_q, risk, 0.0, {true, true, false}) == 0);

  // Nothing qualifies: least predicted risk wins, ties to the lowest index.
  risk << 1.0, 2.0, 3.0;
  CHECK(drs_decide(reward_q, risk, 0.0, {true, true, true}) == 0);
  risk << 2.0, 2.0, 3.0;
  CHECK(drs_decide(reward_q, risk, 0.0, {true, true, true}) == 0);
  CHECK(drs_decide(reward_q, risk, 0.0, {false, true, true}) == 1);

  CHECK_THROWS_AS(drs_decide(reward_q, risk, 0.0, {false, false, false}), std::logic_error);
}

TEST_CASE("action cost combines destination burn with the deadline distance") {
  ScenarioConfig cfg = duo_cfg();
  RiskParams params = default_risk();

  // Agent destination at half charge, 0.5 s past the 1 s deadline.
  CompletionRecord c = make_completion(0, 1.5, true, {0.5, 1.0});
  DecisionRecord d = make_decision(cfg, 0, 0, snapshot({0, 0, 0}, {1, 1}));
  CHECK(rq_action_cost({d, c, cfg}, params) ==
        doctest::Approx(0.25 + 0.00390625).epsilon(1e-12));

  // The server burns no battery; early finish scores negative.
  CompletionRecord srv = make_completion(2, 0.5, false, {0.5, 1.0});
  CHECK(rq_action_cost({d, srv, cfg}, params) ==
        doctest::Approx(-std::pow(0.5, 8.0)).epsilon(1e-12));

  // Death by depletion is costed at twice the deadline.
  CompletionRecord dead = make_completion(0, 0.0, true, {0.0, 1.0},
                                          TaskResolution::ViolatedByDepletion);
  CHECK(rq_action_cost({d, dead, cfg}, params) ==
        doctest::Approx(1.0 * 1.0 + std::pow(1.0, 8.0)).epsilon(1e-12));

  // Doubled energy scale doubles only the battery term.
  RiskParams scaled = params;
  scaled.energy_scale = 2.0;
  CHECK(rq_action_cost({d, c, cfg}, scaled) ==
        doctest::Approx(0.5 + 0.00390625).epsilon(1e-12));
}

TEST_CASE("recording a cost tracks the risk measurement before and after") {
  RiskParams params = default_risk();
  AgentRiskState agent;
  CHECK(!agent.has_pair);
  CHECK(agent.current_eta() == doctest::Approx(0.0));

  rq_record_cost(agent, 4.0, params);
  CHECK(agent.has_pair);
  CHECK(agent.eta_before == doctest::Approx(0.0));  // empty ledger reads zero
  CHECK(agent.eta_after == doctest::Approx(4.0));
  CHECK(agent.current_eta() == doctest::Approx(4.0));

  rq_record_cost(agent, -2.0, params);
  CHECK(agent.eta_before == doctest::Approx(4.0));
  CHECK(agent.eta_after == doctest::Approx(1.0));  // mean of the two tails

  agent.reset();
  CHECK(!agent.has_pair);
  CHECK(agent.ledger.size() == 0);
}

TEST_CASE("the mixed reward blends the actor with the worst-off agent") {
  RiskParams params = default_risk();
  std::vector<AgentRiskState> agents(2);

  agents[0].has_pair = true;
  agents[0].eta_before = -0.2;
  agents[0].eta_after = -0.5;  // falling and negative: best outcome, 20

  // The other agent drifted up while still positive: -10 for it.
  agents[1].has_pair = true;
  agents[1].eta_before = 0.1;
  agents[1].eta_after = 0.3;

  CHECK(rq_reward(agents, 0, params) == doctest::Approx(0.25 * 20 + 0.75 * -10).epsilon(1e-12));
  // = -2.5: the fleet-wide term dominates under beta = 0.75.

  // When the worst-off agent has no history the mixture collapses to the actor.
  agents[1].has_pair = false;
  agents[1].eta_after = 0.0;
  CHECK(rq_reward(agents, 0, params) == doctest::Approx(20.0));

  // Actor can itself be the worst-off one.
  agents[0].eta_before = 0.2;
  agents[0].eta_after = 0.4;
  agents[1].has_pair = true;
  agents[1].eta_before = 0.0;
  agents[1].eta_after = 0.1;
  // actor rv = -10 and is the max-eta agent, so both terms are -10.
  CHECK(rq_reward(agents, 0, params) == doctest::Approx(-10.0));

  CHECK(std::as_const(agents)[0].has_pair);
  AgentRiskState blank;
  std::vector<AgentRiskState> solo{blank};
  CHECK_THROWS_AS(rq_reward(solo, 0, params), std::logic_error);
}

TEST_CASE("learning policies build one value head per agent with the scenario's shape") {
  ScenarioConfig cfg = farm_cfg();
  TrainConfig train;
  train.hidden_sizes = {8, 8};

  RqPolicy rq(cfg, train, default_risk(), 7);
  CHECK(rq.num_agents() == 4);
  CHECK(rq.num_heads() == 1);
  CHECK(rq.state_dim() == 41);
  CHECK(rq.net(0).layer_sizes() == std::vector<int>{41, 8, 8, 5});
  CHECK(std::string(rq.name()) == "rq");

  DrsPolicy drs(cfg, train, DrsParams{}, DqlRewardParams{}, 7);
  CHECK(drs.num_heads() == 2);
  CHECK(std::string(drs.name()) == "drs");

  DqlPolicy dql(cfg, train, DqlRewardParams{}, 7);
  CHECK(dql.num_heads() == 1);
  CHECK(std::string(dql.name()) == "dql");

  // Same master seed, same weights; a different seed diverges.
  RqPolicy twin(cfg, train, default_risk(), 7);
  CHECK(twin.net(2).weights(0) == rq.net(2).weights(0));
  RqPolicy other(cfg, train, default_risk(), 8);
  CHECK(other.net(2).weights(0) != rq.net(2).weights(0));
}

TEST_CASE("an episode turns each agent's decisions into a chained transition stream") {
  ScenarioConfig cfg = duo_cfg();
  cfg.task_types[0].mean_interarrival = 0.3;
  TrainConfig train;
  train.hidden_sizes = {8};
  train.batch_size = 4;
  train.updates_per_episode = 1;

  RqPolicy policy(cfg, train, default_risk(), 11);
  policy.set_training(false);  // keep the weights still so replay is inspectable
  policy.set_epsilon(0.0);

  policy.begin_episode(0);
  SimulationRun run(cfg, policy, Rng(123));
  const Trace trace = run.run();
  policy.end_episode();

  std::vector<int> per_agent(2, 0);
  for (const DecisionRecord& d : trace.decisions)
    per_agent[static_cast<std::size_t>(d.receiver)]++;
  REQUIRE(per_agent[0] + per_agent[1] > 0);

  for (int agent = 0; agent < 2; ++agent) {
    const ReplayBuffer& buf = policy.replay(agent);
    REQUIRE(buf.size() == static_cast<std::size_t>(per_agent[static_cast<std::size_t>(agent)]));
    int terminals = 0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const Transition& t = buf.at(i);
      CHECK(t.state.size() == policy.state_dim());
      if (t.terminal) {
        ++terminals;
        CHECK(t.next_state.isZero(0.0));
        CHECK(i + 1 == buf.size());
      } else {
        CHECK(t.next_state == buf.at(i + 1).state);
      }
    }
    if (buf.size() > 0) CHECK(terminals == 1);
  }

  CHECK(policy.last_episode_rewards().size() == 2);
}

TEST_CASE("evaluation episodes leave the network weights untouched") {
  ScenarioConfig cfg = duo_cfg();
  TrainConfig train;
  train.hidden_sizes = {8};
  RqPolicy policy(cfg, train, default_risk(), 3);
  policy.set_training(false);
  policy.set_epsilon(0.0);

  const Mat before = policy.net(0).weights(0);
  policy.begin_episode(0);
  SimulationRun run(cfg, policy, Rng(42));
  run.run();
  policy.end_episode();
  CHECK(policy.net(0).weights(0) == before);
}

TEST_CASE("checkpoint files are named per agent and head and round-trip") {
  CHECK(LearningPolicyBase::checkpoint_file("rq_seed3", 2, "") == "rq_seed3_agent2.qnet");
  CHECK(LearningPolicyBase::checkpoint_file("drs_seed1", 0, "risk") ==
        "drs_seed1_agent0_risk.qnet");

  ScenarioConfig cfg = duo_cfg();
  TrainConfig train;
  train.hidden_sizes = {8};
  const auto dir = std::filesystem::temp_directory_path() / "riskfleet_ckpt_test";
  std::filesystem::remove_all(dir);

  DrsPolicy source(cfg, train, DrsParams{}, DqlRewardParams{}, 5);
  source.save_checkpoints(dir.string(), "drs_seed5");
  for (int agent = 0; agent < 2; ++agent) {
    CHECK(std::filesystem::exists(dir / ("drs_seed5_agent" + std::to_string(agent) +
                                         "_reward.qnet")));
    CHECK(std::filesystem::exists(dir / ("drs_seed5_agent" + std::to_string(agent) +
                                         "_risk.qnet")));
  }

  DrsPolicy sink(cfg, train, DrsParams{}, DqlRewardParams{}, 999);
  CHECK(sink.net(1, 1).weights(0) != source.net(1, 1).weights(0));
  sink.load_checkpoints(dir.string(), "drs_seed5");
  for (int agent = 0; agent < 2; ++agent)
    for (int head = 0; head < 2; ++head)
      CHECK(sink.net(agent, head).weights(0) == source.net(agent, head).weights(0));

  TrainConfig wider;
  wider.hidden_sizes = {16};
  DrsPolicy mismatched(cfg, wider, DrsParams{}, DqlRewardParams{}, 5);
  CHECK_THROWS_AS(mismatched.load_checkpoints(dir.string(), "drs_seed5"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("parameter validation rejects nonsense") {
  DqlRewardParams dql;
  dql.energy_threshold = 0.0;
  CHECK_THROWS_AS(dql.validate(), ConfigError);

  DrsParams drs;
  drs.weight = 1.5;
  CHECK_THROWS_AS(drs.validate(), ConfigError);
  drs = DrsParams{};
  drs.delay_norm = 0.0;
  CHECK_THROWS_AS(drs.validate(), ConfigError);
}
