#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskfleet/metrics.hpp"
#include "riskfleet/simcore.hpp"

namespace riskfleet {

// Shortest decimal form that round-trips the exact double.
std::string fmt_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// JSON Lines export: a meta line, one line per decision, one per completion,
// and a closing line with the final clock and battery levels.
void write_trace_jsonl(const std::string& path, const Trace& trace);

struct LabeledKpiRow {
  std::string policy;
  std::string seed;  // a number, or "mean" for the averaged row
  KpiRow row;
};

void write_kpi_csv(const std::string& path, const std::vector<LabeledKpiRow>& rows);

// One decided task from a recorded run, carrying both trace records so any
// policy's reward function can be evaluated against it later.
struct RecordedStep {
  int episode = 0;
  int agent = 0;
  std::uint64_t task_seq = 0;
  DecisionRecord decision;
  CompletionRecord completion;
};

struct RecordedDataset {
  int num_uav = 0;
  int num_mec = 0;
  int num_types = 0;
  int episodes = 0;
  std::vector<RecordedStep> steps;  // per episode, in completion order
};

void write_dataset(const std::string& path, const RecordedDataset& dataset);
RecordedDataset load_dataset(const std::string& path);

// Wraps a behavior policy and captures every decided task as a RecordedStep.
class RecordingPolicy final : public OffloadingPolicy {
 public:
  RecordingPolicy(OffloadingPolicy& inner, RecordedDataset& out)
      : inner_(inner), out_(out) {}

  const char* name() const override { return inner_.name(); }
  void begin_episode(int episode) override {
    episode_ = episode;
    out_.episodes = std::max(out_.episodes, episode + 1);
    inner_.begin_episode(episode);
  }
  void end_episode() override { inner_.end_episode(); }
  int decide(const DecisionContext& ctx) override { return inner_.decide(ctx); }
  void on_completion(const TransitionContext& ctx) override {
    out_.steps.push_back(RecordedStep{episode_, ctx.decision.receiver, ctx.completion.task_seq,
                                      ctx.decision, ctx.completion});
    inner_.on_completion(ctx);
  }

 private:
  OffloadingPolicy& inner_;
  RecordedDataset& out_;
  int episode_ = 0;
};

}  // namespace riskfleet
