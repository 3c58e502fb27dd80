#pragma once

#include <string>

#include "riskfleet/metrics.hpp"
#include "riskfleet/model.hpp"
#include "riskfleet/neural.hpp"
#include "riskfleet/policies.hpp"
#include "riskfleet/risk.hpp"

namespace riskfleet {

struct Settings {
  ScenarioConfig scenario;
  RiskParams risk;
  TrainConfig train;
  DqlRewardParams dql;
  DrsParams drs;
  MetricsParams metrics;
};

// INI-style text: [section] or [section.sub] headers, key = value pairs,
// # comments, comma-separated lists. Unknown keys are rejected so typos fail
// loudly instead of silently falling back to defaults.
Settings parse_settings(const std::string& text);
Settings load_settings(const std::string& path);

}  // namespace riskfleet
