#include "riskfleet/io.hpp"

#include <charconv>
#include <fstream>

#include "json.hpp"

namespace riskfleet {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  expect(res.ec == std::errc(), "double formatting failed");
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  return out;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    expect(row.size() == header.size(), "csv row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw ConfigError("short write: " + path);
}

namespace {

const char* resolution_name(TaskResolution r) {
  return r == TaskResolution::ViolatedByDepletion ? "depleted" : "completed";
}

}  // namespace

void write_trace_jsonl(const std::string& path, const Trace& trace) {
  std::ofstream out = open_out(path);

  ordered_json meta;
  meta["record"] = "meta";
  meta["num_uav"] = trace.num_uav;
  meta["num_mec"] = trace.num_mec;
  meta["num_types"] = trace.num_types;
  meta["generated"] = trace.generated;
  out << meta.dump() << "\n";

  for (const DecisionRecord& d : trace.decisions) {
    ordered_json j;
    j["record"] = "decision";
    j["task"] = d.task_seq;
    j["t"] = d.decided_at;
    j["type"] = d.type;
    j["origin_iot"] = d.origin_iot;
    j["receiver"] = d.receiver;
    j["action"] = d.action;
    j["iot_to_uav"] = d.iot_to_uav;
    j["energy"] = d.snapshot.battery_levels;
    j["cpu_delays"] = d.snapshot.cpu_delays;
    out << j.dump() << "\n";
  }
  for (const CompletionRecord& c : trace.completions) {
    ordered_json j;
    j["record"] = "completion";
    j["task"] = c.task_seq;
    j["t"] = c.completed_at;
    j["type"] = c.type;
    j["receiver"] = c.receiver;
    j["destination"] = c.destination;
    j["delay"] = {{"iot_to_uav", c.delay.iot_to_uav},
                  {"relay", c.delay.relay},
                  {"queue_wait", c.delay.queue_wait},
                  {"processing", c.delay.processing},
                  {"total", c.delay.total()}};
    j["violated"] = c.violated;
    j["resolution"] = resolution_name(c.resolution);
    j["energy"] = c.uav_energy;
    out << j.dump() << "\n";
  }

  ordered_json end;
  end["record"] = "end";
  end["final_clock"] = trace.final_clock;
  end["energy"] = trace.final_uav_energy;
  out << end.dump() << "\n";
  if (!out) throw ConfigError("short write: " + path);
}

void write_kpi_csv(const std::string& path, const std::vector<LabeledKpiRow>& rows) {
  expect(!rows.empty(), "kpi csv needs at least one row");
  std::vector<std::string> header{"policy", "seed"};
  for (const std::string& name : rows.front().row.names) header.push_back(name);

  std::vector<std::vector<std::string>> cells;
  for (const LabeledKpiRow& labeled : rows) {
    expect(labeled.row.names == rows.front().row.names, "kpi rows with mismatched columns");
    std::vector<std::string> row{labeled.policy, labeled.seed};
    for (double v : labeled.row.values) row.push_back(fmt_double(v));
    cells.push_back(std::move(row));
  }
  write_csv(path, header, cells);
}

namespace {

ordered_json snapshot_to_json(const NodeSnapshot& s) {
  ordered_json j;
  j["cpu_delays"] = s.cpu_delays;
  j["batteries"] = s.battery_levels;
  j["feasible"] = std::vector<int>(s.feasible.begin(), s.feasible.end());
  return j;
}

NodeSnapshot snapshot_from_json(const ordered_json& j) {
  NodeSnapshot s;
  s.cpu_delays = j.at("cpu_delays").get<std::vector<double>>();
  s.battery_levels = j.at("batteries").get<std::vector<double>>();
  for (int v : j.at("feasible").get<std::vector<int>>()) s.feasible.push_back(v != 0);
  return s;
}

}  // namespace

void write_dataset(const std::string& path, const RecordedDataset& dataset) {
  std::ofstream out = open_out(path);
  ordered_json header;
  header["record"] = "header";
  header["version"] = 1;
  header["num_uav"] = dataset.num_uav;
  header["num_mec"] = dataset.num_mec;
  header["num_types"] = dataset.num_types;
  header["episodes"] = dataset.episodes;
  header["steps"] = dataset.steps.size();
  out << header.dump() << "\n";

  for (const RecordedStep& s : dataset.steps) {
    ordered_json j;
    j["record"] = "step";
    j["episode"] = s.episode;
    j["agent"] = s.agent;
    j["task"] = s.task_seq;
    ordered_json d;
    d["receiver"] = s.decision.receiver;
    d["type"] = s.decision.type;
    d["origin_iot"] = s.decision.origin_iot;
    d["created_at"] = s.decision.created_at;
    d["decided_at"] = s.decision.decided_at;
    d["action"] = s.decision.action;
    d["iot_to_uav"] = s.decision.iot_to_uav;
    d["snapshot"] = snapshot_to_json(s.decision.snapshot);
    j["decision"] = std::move(d);
    ordered_json c;
    c["type"] = s.completion.type;
    c["receiver"] = s.completion.receiver;
    c["destination"] = s.completion.destination;
    c["completed_at"] = s.completion.completed_at;
    c["iot_to_uav"] = s.completion.delay.iot_to_uav;
    c["relay"] = s.completion.delay.relay;
    c["queue_wait"] = s.completion.delay.queue_wait;
    c["processing"] = s.completion.delay.processing;
    c["violated"] = s.completion.violated;
    c["depleted"] = s.completion.resolution == TaskResolution::ViolatedByDepletion;
    c["dest_mean_uplink"] = s.completion.dest_mean_uplink_at_enqueue;
    c["energy"] = s.completion.uav_energy;
    j["completion"] = std::move(c);
    out << j.dump() << "\n";
  }
  if (!out) throw ConfigError("short write: " + path);
}

RecordedDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset missing header: " + path);

  RecordedDataset ds;
  try {
    const ordered_json header = ordered_json::parse(line);
    if (header.at("record") != "header" || header.at("version") != 1)
      throw ConfigError("unsupported dataset header: " + path);
    ds.num_uav = header.at("num_uav").get<int>();
    ds.num_mec = header.at("num_mec").get<int>();
    ds.num_types = header.at("num_types").get<int>();
    ds.episodes = header.at("episodes").get<int>();

    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const ordered_json j = ordered_json::parse(line);
      if (j.at("record") != "step") throw ConfigError("unexpected record in dataset: " + path);
      RecordedStep s;
      s.episode = j.at("episode").get<int>();
      s.agent = j.at("agent").get<int>();
      s.task_seq = j.at("task").get<std::uint64_t>();
      const ordered_json& d = j.at("decision");
      s.decision.task_seq = s.task_seq;
      s.decision.receiver = d.at("receiver").get<int>();
      s.decision.type = d.at("type").get<int>();
      s.decision.origin_iot = d.at("origin_iot").get<int>();
      s.decision.created_at = d.at("created_at").get<double>();
      s.decision.decided_at = d.at("decided_at").get<double>();
      s.decision.action = d.at("action").get<int>();
      s.decision.iot_to_uav = d.at("iot_to_uav").get<double>();
      s.decision.snapshot = snapshot_from_json(d.at("snapshot"));
      const ordered_json& c = j.at("completion");
      s.completion.task_seq = s.task_seq;
      s.completion.type = c.at("type").get<int>();
      s.completion.receiver = c.at("receiver").get<int>();
      s.completion.destination = c.at("destination").get<int>();
      s.completion.completed_at = c.at("completed_at").get<double>();
      s.completion.delay.iot_to_uav = c.at("iot_to_uav").get<double>();
      s.completion.delay.relay = c.at("relay").get<double>();
      s.completion.delay.queue_wait = c.at("queue_wait").get<double>();
      s.completion.delay.processing = c.at("processing").get<double>();
      s.completion.violated = c.at("violated").get<bool>();
      s.completion.resolution = c.at("depleted").get<bool>()
                                    ? TaskResolution::ViolatedByDepletion
                                    : TaskResolution::Completed;
      s.completion.dest_mean_uplink_at_enqueue = c.at("dest_mean_uplink").get<double>();
      s.completion.uav_energy = c.at("energy").get<std::vector<double>>();
      ds.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed dataset " + path + ": " + e.what());
  }
  return ds;
}

}  // namespace riskfleet
