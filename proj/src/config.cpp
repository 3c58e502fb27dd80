#include "riskfleet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace riskfleet {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Flat key/value view of the file; keys are "section.key".
class Reader {
 public:
  explicit Reader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (!entries_.emplace(full, value).second)
        throw ConfigError("duplicate key: " + full);
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  bool section_present(const std::string& section) const {
    const std::string prefix = section + ".";
    auto it = entries_.lower_bound(prefix);
    return it != entries_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

  std::string text(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required key: " + key);
    used_.insert(key);
    return it->second;
  }

  double number(const std::string& key) { return to_number(key, text(key)); }

  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  long long integer(const std::string& key) {
    const double v = number(key);
    const long long i = static_cast<long long>(v);
    if (static_cast<double>(i) != v) throw ConfigError(key + ": expected an integer");
    return i;
  }

  long long integer(const std::string& key, long long fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::vector<double> number_list(const std::string& key) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text(key));
    while (std::getline(in, item, ',')) out.push_back(to_number(key, trim(item)));
    return out;
  }

  void reject_unused() const {
    for (const auto& [key, value] : entries_)
      if (!used_.count(key)) throw ConfigError("unknown key: " + key);
  }

 private:
  double to_number(const std::string& key, const std::string& value) {
    if (value == "inf") return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
      throw ConfigError(key + ": cannot parse number '" + value + "'");
    return v;
  }

  std::map<std::string, std::string> entries_;
  std::set<std::string> used_;
};

EnergyProfile read_energy(Reader& r, const std::string& section, const EnergyProfile& base) {
  EnergyProfile p = base;
  p.battery_capacity = r.number(section + ".capacity", p.battery_capacity);
  p.hover_power = r.number(section + ".hover", p.hover_power);
  p.antenna_power = r.number(section + ".antenna", p.antenna_power);
  p.cpu_idle_power = r.number(section + ".cpu_idle", p.cpu_idle_power);
  p.cpu_active_power = r.number(section + ".cpu_active", p.cpu_active_power);
  return p;
}

}  // namespace

Settings parse_settings(const std::string& text) {
  Reader r(text);
  Settings s;

  ScenarioConfig& sc = s.scenario;
  sc.num_iot = static_cast<int>(r.integer("scenario.num_iot"));
  sc.num_uav = static_cast<int>(r.integer("scenario.num_uav"));
  sc.num_mec = static_cast<int>(r.integer("scenario.num_mec"));
  sc.sim_duration = r.number("scenario.sim_duration");
  sc.rng_seed = static_cast<std::uint64_t>(r.integer("scenario.rng_seed", 1));
  sc.seconds_per_hour = r.number("scenario.seconds_per_hour", 3600.0);

  if (r.has("scenario.iot_assignment")) {
    for (double v : r.number_list("scenario.iot_assignment"))
      sc.iot_assignment.push_back(static_cast<int>(v));
  } else {
    sc.iot_assignment = ScenarioConfig::block_assignment(sc.num_iot, sc.num_uav);
  }

  sc.link_delays.iot_uav_delay = r.number("links.iot_uav", sc.link_delays.iot_uav_delay);
  sc.link_delays.uav_uav_delay = r.number("links.uav_uav", sc.link_delays.uav_uav_delay);
  sc.link_delays.uav_mec_delay = r.number("links.uav_mec", sc.link_delays.uav_mec_delay);
  sc.link_delays.jitter_fraction = r.number("links.jitter", sc.link_delays.jitter_fraction);

  for (const char* kind_name : {"fire_detection", "pest_detection", "growth_monitoring"}) {
    const std::string section = std::string("task.") + kind_name;
    if (!r.section_present(section)) continue;
    TaskType t;
    t.kind = task_kind_from_string(kind_name);
    t.is_fire = t.kind == TaskKind::FireDetection;
    t.mean_interarrival = r.number(section + ".mean_interarrival");
    t.deadline = r.number(section + ".deadline");
    t.proc_time_uav = r.number(section + ".proc_uav");
    t.proc_time_mec = r.number(section + ".proc_mec");
    sc.task_types.push_back(t);
  }

  EnergyProfile base;
  if (r.section_present("energy.default")) base = read_energy(r, "energy.default", base);
  for (int j = 0; j < sc.num_uav; ++j) {
    const std::string section = "energy." + std::to_string(j);
    sc.energy_profiles.push_back(r.section_present(section) ? read_energy(r, section, base)
                                                            : base);
  }

  s.risk.energy_growth = r.number("risk.energy_growth", s.risk.energy_growth);
  s.risk.fire_growth = r.number("risk.fire_growth", s.risk.fire_growth);
  s.risk.other_growth = r.number("risk.other_growth", s.risk.other_growth);
  s.risk.energy_scale = r.number("risk.energy_scale", s.risk.energy_scale);
  s.risk.alpha_percent = r.number("risk.alpha", s.risk.alpha_percent);
  s.risk.beta = r.number("risk.beta", s.risk.beta);

  TrainConfig& tc = s.train;
  tc.learning_rate = r.number("train.learning_rate", tc.learning_rate);
  tc.discount = r.number("train.discount", tc.discount);
  tc.epsilon_start = r.number("train.epsilon_start", tc.epsilon_start);
  tc.epsilon_end = r.number("train.epsilon_end", tc.epsilon_end);
  tc.epsilon_decay_fraction = r.number("train.epsilon_decay_fraction", tc.epsilon_decay_fraction);
  tc.batch_size = static_cast<int>(r.integer("train.batch_size", tc.batch_size));
  tc.episodes = static_cast<int>(r.integer("train.episodes", tc.episodes));
  tc.target_sync_interval =
      static_cast<int>(r.integer("train.target_sync", tc.target_sync_interval));
  tc.replay_capacity =
      static_cast<std::size_t>(r.integer("train.replay_capacity",
                                         static_cast<long long>(tc.replay_capacity)));
  if (r.has("train.hidden")) {
    tc.hidden_sizes.clear();
    for (double v : r.number_list("train.hidden")) tc.hidden_sizes.push_back(static_cast<int>(v));
  }
  tc.updates_per_episode =
      static_cast<int>(r.integer("train.updates_per_episode", tc.updates_per_episode));

  s.dql.energy_threshold = r.number("dql.energy_threshold", s.dql.energy_threshold);
  s.dql.penalty_mec_avoidable = r.number("dql.penalty_mec", s.dql.penalty_mec_avoidable);
  s.dql.penalty_local_avoidable = r.number("dql.penalty_local", s.dql.penalty_local_avoidable);
  s.dql.penalty_other_avoidable = r.number("dql.penalty_other", s.dql.penalty_other_avoidable);
  s.dql.penalty_inevitable = r.number("dql.penalty_inevitable", s.dql.penalty_inevitable);

  s.drs.weight = r.number("drs.weight", s.drs.weight);
  s.drs.delay_norm = r.number("drs.delay_norm", s.drs.delay_norm);
  s.drs.risk_threshold = r.number("drs.risk_threshold", s.drs.risk_threshold);

  s.metrics.weight = r.number("metrics.weight", s.metrics.weight);
  s.metrics.delay_norm = r.number("metrics.delay_norm", s.metrics.delay_norm);
  s.metrics.violation_norm = r.number("metrics.violation_norm", s.metrics.violation_norm);

  r.reject_unused();

  s.scenario.validate();
  s.risk.validate();
  s.train.validate();
  s.dql.validate();
  s.drs.validate();
  s.metrics.validate();
  return s;
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_settings(buf.str());
}

}  // namespace riskfleet
