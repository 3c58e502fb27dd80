#include <cstdio>
#include <exception>

#include "CLI11.hpp"

#include "riskfleet/runner.hpp"

namespace {

void add_plan_options(CLI::App* cmd, riskfleet::ExperimentPlan& plan) {
  cmd->add_option("--scenario", plan.scenario_path, "scenario configuration file")
      ->required();
  cmd->add_option("--policy", plan.policies, "policies: rr, qhef, dql, drs, rq")
      ->delimiter(',');
  cmd->add_option("--seeds", plan.seeds, "master seeds")->delimiter(',');
  cmd->add_option("--episodes", plan.episodes,
                  "episode budget (train), or run count (record)");
  cmd->add_option("--out", plan.out_dir, "output directory")->required();
  cmd->add_option("--checkpoint", plan.checkpoint_dir, "checkpoint directory to load");
  cmd->add_option("--offline-dataset", plan.offline_dataset,
                  "recorded transition dataset (train input / record output)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MEC-assisted UAV task-offloading simulator and policy trainer"};
  app.require_subcommand(1);

  riskfleet::ExperimentPlan plan;
  CLI::App* train = app.add_subcommand("train", "train learning policies");
  CLI::App* eval = app.add_subcommand("eval", "evaluate policies over seeds");
  CLI::App* record = app.add_subcommand("record", "record an offline dataset");
  add_plan_options(train, plan);
  add_plan_options(eval, plan);
  add_plan_options(record, plan);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) riskfleet::cmd_train(plan);
    if (eval->parsed()) riskfleet::cmd_eval(plan);
    if (record->parsed()) riskfleet::cmd_record(plan);
    return 0;
  } catch (const riskfleet::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const riskfleet::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
