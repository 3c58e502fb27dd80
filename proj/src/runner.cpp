#include "riskfleet/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

namespace riskfleet {

namespace fs = std::filesystem;

bool is_learning_policy(const std::string& name) {
  if (name == "rr" || name == "qhef") return false;
  if (name == "dql" || name == "drs" || name == "rq") return true;
  throw ConfigError("unknown policy: " + name);
}

std::unique_ptr<OffloadingPolicy> make_policy(const std::string& name, const Settings& settings,
                                              std::uint64_t master_seed) {
  if (name == "rr") return std::make_unique<RoundRobinPolicy>();
  if (name == "qhef") return std::make_unique<QhefPolicy>();
  if (name == "dql")
    return std::make_unique<DqlPolicy>(settings.scenario, settings.train, settings.dql,
                                       master_seed);
  if (name == "drs")
    return std::make_unique<DrsPolicy>(settings.scenario, settings.train, settings.drs,
                                       settings.dql, master_seed);
  if (name == "rq")
    return std::make_unique<RqPolicy>(settings.scenario, settings.train, settings.risk,
                                      master_seed);
  throw ConfigError("unknown policy: " + name);
}

int worker_count() {
  if (const char* env = std::getenv("RISKFLEET_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError("RISKFLEET_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

// Runs independent jobs on at most worker_count() threads; the first exception
// wins and is rethrown on the caller's thread.
void run_jobs(std::vector<std::function<void()>>& jobs) {
  const int workers = std::min<int>(worker_count(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      std::size_t mine;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (first_error || next >= jobs.size()) return;
        mine = next++;
      }
      try {
        jobs[mine]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

Rng env_stream(std::uint64_t seed, int episode) {
  return Rng(Rng::derive(seed, {Rng::tag("env"), static_cast<std::uint64_t>(episode)}));
}

double mean_sorted(std::vector<double> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string seed_name(std::uint64_t seed) { return std::to_string(seed); }

void write_reward_trace(const std::string& path, const TrainOutput& out, int num_agents) {
  std::vector<std::string> header{"episode"};
  for (int j = 0; j < num_agents; ++j) header.push_back("agent" + std::to_string(j));
  header.push_back("total");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t e = 0; e < out.episode_agent_rewards.size(); ++e) {
    std::vector<std::string> row{std::to_string(e)};
    double total = 0;
    for (double r : out.episode_agent_rewards[e]) {
      row.push_back(fmt_double(r));
      total += r;
    }
    row.push_back(fmt_double(total));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace

TrainOutput train_policy(LearningPolicyBase& policy, const Settings& settings,
                         std::uint64_t seed, int episodes) {
  expect(episodes >= 0, "negative episode budget");
  TrainConfig schedule = policy.train_config();
  schedule.episodes = std::max(episodes, 1);
  TrainOutput out;
  out.episode_agent_rewards.reserve(static_cast<std::size_t>(episodes));
  policy.set_training(true);
  for (int e = 0; e < episodes; ++e) {
    policy.set_epsilon(schedule.epsilon_at(e));
    policy.begin_episode(e);
    SimulationRun(settings.scenario, policy, env_stream(seed, e)).run();
    policy.end_episode();
    out.episode_agent_rewards.push_back(policy.last_episode_rewards());
  }
  return out;
}

namespace {

void offline_feed_episode(LearningPolicyBase& policy, const std::vector<const RecordedStep*>& steps,
                          const ScenarioConfig& cfg, int episode_index) {
  policy.begin_episode(episode_index);
  std::vector<const RecordedStep*> by_decision = steps;
  std::sort(by_decision.begin(), by_decision.end(),
            [](const RecordedStep* a, const RecordedStep* b) {
              if (a->decision.decided_at != b->decision.decided_at)
                return a->decision.decided_at < b->decision.decided_at;
              return a->task_seq < b->task_seq;
            });
  for (const RecordedStep* s : by_decision) {
    Vec state = make_observed_state(s->decision.type, s->decision.receiver, s->decision.snapshot,
                                    cfg)
                    .encode();
    policy.inject_decision(s->agent, std::move(state), s->decision.action, s->task_seq);
  }
  for (const RecordedStep* s : steps)
    policy.on_completion(TransitionContext{s->decision, s->completion, cfg});
  policy.end_episode();
}

}  // namespace

TrainOutput train_policy_offline(LearningPolicyBase& policy, const Settings& settings,
                                 const RecordedDataset& dataset, int episodes) {
  const ScenarioConfig& cfg = settings.scenario;
  if (dataset.num_uav != cfg.num_uav || dataset.num_mec != cfg.num_mec ||
      dataset.num_types != static_cast<int>(cfg.task_types.size()))
    throw ConfigError("dataset topology does not match the scenario");
  if (dataset.episodes == 0) throw ConfigError("dataset holds no recorded episodes");

  std::vector<std::vector<const RecordedStep*>> by_episode(
      static_cast<std::size_t>(dataset.episodes));
  for (const RecordedStep& s : dataset.steps) {
    if (s.episode < 0 || s.episode >= dataset.episodes)
      throw ConfigError("dataset step references a missing episode");
    by_episode[static_cast<std::size_t>(s.episode)].push_back(&s);
  }

  TrainOutput out;
  policy.set_training(true);
  for (int e = 0; e < episodes; ++e) {
    const auto& steps = by_episode[static_cast<std::size_t>(e % dataset.episodes)];
    offline_feed_episode(policy, steps, cfg, e);
    out.episode_agent_rewards.push_back(policy.last_episode_rewards());
  }
  return out;
}

Trace eval_episode(OffloadingPolicy& policy, const Settings& settings, std::uint64_t seed) {
  auto* learner = dynamic_cast<LearningPolicyBase*>(&policy);
  if (learner) {
    learner->set_epsilon(0);
    learner->set_training(false);
  }
  policy.begin_episode(0);
  Trace trace = SimulationRun(settings.scenario, policy, env_stream(seed, 0)).run();
  policy.end_episode();
  return trace;
}

std::string find_checkpoint_prefix(const std::string& dir, const std::string& policy) {
  const std::string head = policy + "_seed";
  std::optional<std::uint64_t> best;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      const std::string tail = "_agent0.qnet";
      if (name.size() <= head.size() + tail.size()) continue;
      if (name.compare(0, head.size(), head) != 0) continue;
      if (name.compare(name.size() - tail.size(), tail.size(), tail) != 0) continue;
      const std::string digits = name.substr(head.size(), name.size() - head.size() - tail.size());
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) continue;
      const std::uint64_t seed = std::stoull(digits);
      if (!best || seed < *best) best = seed;
    }
  }
  if (!best)
    throw ConfigError("no checkpoint for policy '" + policy + "' under " + dir);
  return head + std::to_string(*best);
}

void cmd_train(const ExperimentPlan& plan) {
  if (plan.policies.empty()) throw ConfigError("train: no policy given");
  if (plan.seeds.empty()) throw ConfigError("train: no seeds given");
  for (const std::string& name : plan.policies)
    if (!is_learning_policy(name))
      throw ConfigError("train: policy '" + name + "' has no trainable parameters");

  const Settings settings = load_settings(plan.scenario_path);
  const int episodes = plan.episodes >= 0 ? plan.episodes : settings.train.episodes;
  const fs::path out(plan.out_dir);
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "kpis");

  std::optional<RecordedDataset> dataset;
  if (!plan.offline_dataset.empty()) dataset = load_dataset(plan.offline_dataset);

  std::vector<std::function<void()>> jobs;
  for (const std::string& name : plan.policies) {
    for (const std::uint64_t seed : plan.seeds) {
      jobs.push_back([&, name, seed] {
        auto policy = make_policy(name, settings, seed);
        auto& learner = dynamic_cast<LearningPolicyBase&>(*policy);
        const TrainOutput result =
            dataset ? train_policy_offline(learner, settings, *dataset, episodes)
                    : train_policy(learner, settings, seed, episodes);
        const std::string prefix = name + "_seed" + seed_name(seed);
        learner.save_checkpoints((out / "checkpoints").string(), prefix);
        write_reward_trace((out / "kpis" / (prefix + "_rewards.csv")).string(), result,
                           learner.num_agents());
      });
    }
  }
  run_jobs(jobs);
}

void cmd_eval(const ExperimentPlan& plan) {
  if (plan.policies.empty()) throw ConfigError("eval: no policy given");
  if (plan.seeds.empty()) throw ConfigError("eval: no seeds given");

  const Settings settings = load_settings(plan.scenario_path);
  for (const std::string& name : plan.policies)
    if (is_learning_policy(name) && plan.checkpoint_dir.empty())
      throw ConfigError("eval: policy '" + name + "' needs --checkpoint (or train first)");

  const fs::path out(plan.out_dir);
  fs::create_directories(out / "traces");
  fs::create_directories(out / "kpis");

  struct JobResult {
    KpiReport report;
  };
  std::vector<JobResult> results(plan.policies.size() * plan.seeds.size());

  std::vector<std::function<void()>> jobs;
  for (std::size_t p = 0; p < plan.policies.size(); ++p) {
    const std::string& name = plan.policies[p];
    for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
      const std::uint64_t seed = plan.seeds[s];
      const std::size_t slot = p * plan.seeds.size() + s;
      jobs.push_back([&, name, seed, slot] {
        auto policy = make_policy(name, settings, seed);
        if (auto* learner = dynamic_cast<LearningPolicyBase*>(policy.get()))
          learner->load_checkpoints(plan.checkpoint_dir,
                                    find_checkpoint_prefix(plan.checkpoint_dir, name));
        const Trace trace = eval_episode(*policy, settings, seed);
        write_trace_jsonl((out / "traces" / (name + "_seed" + seed_name(seed) + ".jsonl")).string(),
                          trace);
        KpiReport report = compute_kpis(trace);
        report.objective_value = objective(report, settings.metrics);
        results[slot].report = std::move(report);
      });
    }
  }
  run_jobs(jobs);

  std::vector<LabeledKpiRow> labeled;
  for (std::size_t p = 0; p < plan.policies.size(); ++p) {
    std::vector<KpiRow> seed_rows;
    for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
      KpiRow row = kpi_row(results[p * plan.seeds.size() + s].report);
      seed_rows.push_back(row);
      labeled.push_back(LabeledKpiRow{plan.policies[p], seed_name(plan.seeds[s]), std::move(row)});
    }
    labeled.push_back(LabeledKpiRow{plan.policies[p], "mean", average_rows(seed_rows)});
  }
  write_kpi_csv((out / "kpis" / "summary.csv").string(), labeled);

  // Per-figure tables, averaged over seeds.
  const std::size_t num_types = settings.scenario.task_types.size();
  const int num_nodes = settings.scenario.num_nodes();
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t p = 0; p < plan.policies.size(); ++p) {
      for (std::size_t k = 0; k < num_types; ++k) {
        std::vector<double> counts, rates;
        for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
          const KpiReport& r = results[p * plan.seeds.size() + s].report;
          counts.push_back(static_cast<double>(r.violations_by_type[k]));
          rates.push_back(r.violation_rate_by_type[k]);
        }
        rows.push_back({plan.policies[p], to_string(settings.scenario.task_types[k].kind),
                        fmt_double(mean_sorted(counts)), fmt_double(mean_sorted(rates))});
      }
    }
    write_csv((out / "kpis" / "fig_violations.csv").string(),
              {"policy", "task_type", "mean_violations", "mean_rate"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t p = 0; p < plan.policies.size(); ++p) {
      for (int n = 0; n < num_nodes; ++n) {
        std::vector<double> means, p50s, p90s, p99s;
        for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
          const DelaySummary& d =
              results[p * plan.seeds.size() + s].report.delay_by_node[static_cast<std::size_t>(n)];
          means.push_back(d.mean);
          p50s.push_back(d.p50);
          p90s.push_back(d.p90);
          p99s.push_back(d.p99);
        }
        rows.push_back({plan.policies[p], std::to_string(n), fmt_double(mean_sorted(means)),
                        fmt_double(mean_sorted(p50s)), fmt_double(mean_sorted(p90s)),
                        fmt_double(mean_sorted(p99s))});
      }
    }
    write_csv((out / "kpis" / "fig_delay_per_node.csv").string(),
              {"policy", "node", "mean", "p50", "p90", "p99"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t p = 0; p < plan.policies.size(); ++p) {
      for (int j = 0; j < settings.scenario.num_uav; ++j) {
        std::vector<double> energy;
        for (std::size_t s = 0; s < plan.seeds.size(); ++s)
          energy.push_back(results[p * plan.seeds.size() + s]
                               .report.remaining_energy[static_cast<std::size_t>(j)]);
        rows.push_back({plan.policies[p], std::to_string(j), fmt_double(mean_sorted(energy))});
      }
    }
    write_csv((out / "kpis" / "fig_energy.csv").string(),
              {"policy", "uav", "mean_remaining_energy"}, rows);
  }
}

void cmd_record(const ExperimentPlan& plan) {
  if (plan.seeds.empty()) throw ConfigError("record: a seed is required");
  const std::string behavior = plan.policies.empty() ? std::string("rr") : plan.policies.front();

  const Settings settings = load_settings(plan.scenario_path);
  const int runs = plan.episodes >= 0 ? plan.episodes : 100;
  const std::uint64_t seed = plan.seeds.front();

  auto policy = make_policy(behavior, settings, seed);
  if (auto* learner = dynamic_cast<LearningPolicyBase*>(policy.get())) {
    if (plan.checkpoint_dir.empty())
      throw ConfigError("record: behavior policy '" + behavior + "' needs --checkpoint");
    learner->load_checkpoints(plan.checkpoint_dir,
                              find_checkpoint_prefix(plan.checkpoint_dir, behavior));
    learner->set_epsilon(0);
    learner->set_training(false);
  }

  RecordedDataset dataset;
  dataset.num_uav = settings.scenario.num_uav;
  dataset.num_mec = settings.scenario.num_mec;
  dataset.num_types = static_cast<int>(settings.scenario.task_types.size());
  RecordingPolicy recorder(*policy, dataset);
  for (int e = 0; e < runs; ++e) {
    recorder.begin_episode(e);
    SimulationRun(settings.scenario, recorder, env_stream(seed, e)).run();
    recorder.end_episode();
  }

  fs::path target;
  if (!plan.offline_dataset.empty()) {
    target = plan.offline_dataset;
  } else {
    fs::create_directories(plan.out_dir);
    target = fs::path(plan.out_dir) / "dataset.jsonl";
  }
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_dataset(target.string(), dataset);
}

}  // namespace riskfleet
