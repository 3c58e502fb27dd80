#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "riskfleet/model.hpp"

using namespace riskfleet;

namespace {

EnergyProfile farm_profile() {
  EnergyProfile p;
  p.battery_capacity = 570;
  p.hover_power = 211;
  p.antenna_power = 17;
  p.cpu_idle_power = 4320;
  p.cpu_active_power = 12960;
  return p;
}

ComputeNode farm_uav(int id = 0) {
  ComputeNode n;
  n.id = id;
  n.role = NodeRole::Uav;
  n.energy = farm_profile();
  n.seconds_per_hour = 3600.0;
  return n;
}

}  // namespace

TEST_CASE("full battery before any time passes") {
  ComputeNode n = farm_uav();
  CHECK(remaining_energy(n, 0.0) == 1.0);
}

TEST_CASE("five seconds of hovering with an idle cpu") {
  ComputeNode n = farm_uav();
  CHECK(remaining_energy(n, 5.0) == doctest::Approx(0.9889181286549708).epsilon(1e-12));
}

TEST_CASE("one second of cpu work on top of five seconds hovering") {
  ComputeNode n = farm_uav();
  n.cpu_active_seconds = 1.0;  // ten fire detections at 0.1 s
  CHECK(remaining_energy(n, 5.0) == doctest::Approx(0.9847076023391813).epsilon(1e-12));
}

TEST_CASE("active cpu term is linear in the seconds worked") {
  ComputeNode a = farm_uav();
  ComputeNode b = farm_uav();
  ComputeNode idle = farm_uav();
  a.cpu_active_seconds = 0.7;
  b.cpu_active_seconds = 1.4;
  const double base = remaining_energy(idle, 5.0);
  const double drop_a = base - remaining_energy(a, 5.0);
  const double drop_b = base - remaining_energy(b, 5.0);
  CHECK(drop_b == doctest::Approx(2.0 * drop_a).epsilon(1e-12));
}

TEST_CASE("battery level never rises as the clock advances") {
  ComputeNode n = farm_uav();
  double prev = remaining_energy(n, 0.0);
  for (int i = 1; i <= 200; ++i) {
    // drain also accrues cpu work along the way
    if (i % 7 == 0) n.cpu_active_seconds += 0.4;
    const double cur = remaining_energy(n, i * 0.5);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("battery clamps at zero instead of going negative") {
  ComputeNode n = farm_uav();
  // base load is 4548 units/hour against a 570 unit battery: dead in ~451 s
  CHECK(remaining_energy(n, 5000.0) == 0.0);
  CHECK(node_depleted(n, 5000.0));
}

TEST_CASE("rewinding the energy clock is rejected") {
  ComputeNode n = farm_uav();
  remaining_energy(n, 10.0);
  CHECK_THROWS(remaining_energy(n, 9.0));
}

TEST_CASE("querying battery on a mec node is rejected") {
  ComputeNode n;
  n.role = NodeRole::Mec;
  CHECK_THROWS(remaining_energy(n, 0.0));
}

TEST_CASE("depletion latches even though the battery formula stays clamped") {
  ComputeNode n = farm_uav();
  CHECK_FALSE(node_depleted(n, 1.0));
  CHECK(node_depleted(n, 100000.0));
  CHECK(node_depleted(n, 100000.0));
}

TEST_CASE("energy audit accepts an honest log and rejects a padded one") {
  ComputeNode n = farm_uav();
  n.cpu_active_seconds = 0.0;
  std::vector<ProcessingLogEntry> empty_log;
  CHECK(total_energy_identity_check(n, empty_log, 0.0));

  ComputeNode worked = farm_uav();
  worked.cpu_active_seconds = 0.3;
  std::vector<ProcessingLogEntry> log{{0, 0.3}};
  remaining_energy(worked, 5.0);
  CHECK(total_energy_identity_check(worked, log, 5.0));

  std::vector<ProcessingLogEntry> padded{{0, 0.3}, {0, 0.2}};
  CHECK_FALSE(total_energy_identity_check(worked, padded, 5.0));
}

TEST_CASE("task kinds round-trip through their names") {
  CHECK(task_kind_from_string("fire_detection") == TaskKind::FireDetection);
  CHECK(task_kind_from_string("pest_detection") == TaskKind::PestDetection);
  CHECK(task_kind_from_string("growth_monitoring") == TaskKind::GrowthMonitoring);
  CHECK(to_string(TaskKind::FireDetection) == std::string("fire_detection"));
  CHECK_THROWS(task_kind_from_string("weed_control"));
}

TEST_CASE("link delay is zero to self and routes through the mec rate") {
  LinkDelayModel m;
  CHECK(m.base_between(1, NodeRole::Uav, 1, NodeRole::Uav) == 0.0);
  CHECK(m.base_between(0, NodeRole::Uav, 2, NodeRole::Uav) == doctest::Approx(0.05));
  CHECK(m.base_between(1, NodeRole::Uav, 4, NodeRole::Mec) == doctest::Approx(0.1));
  CHECK(m.base_between(4, NodeRole::Mec, 1, NodeRole::Uav) == doctest::Approx(0.1));
}

TEST_CASE("jitter spans plus and minus ten percent of the base") {
  LinkDelayModel m;
  CHECK(m.jittered(0.05, 0.0) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(m.jittered(0.05, 1.0) == doctest::Approx(0.055).epsilon(1e-12));
  CHECK(m.jittered(0.05, -1.0) == doctest::Approx(0.045).epsilon(1e-12));
}

TEST_CASE("block assignment splits devices evenly across uavs") {
  const std::vector<int> got = ScenarioConfig::block_assignment(16, 4);
  REQUIRE(got.size() == 16);
  for (int i = 0; i < 16; ++i) CHECK(got[static_cast<std::size_t>(i)] == i / 4);
}

TEST_CASE("scenario validation rejects broken configs") {
  ScenarioConfig cfg;
  cfg.num_iot = 4;
  cfg.num_uav = 2;
  cfg.num_mec = 1;
  cfg.sim_duration = 5;
  cfg.iot_assignment = ScenarioConfig::block_assignment(4, 2);
  TaskType t;
  t.kind = TaskKind::FireDetection;
  t.is_fire = true;
  t.mean_interarrival = 1;
  t.deadline = 1;
  t.proc_time_uav = 0.1;
  t.proc_time_mec = 0.05;
  cfg.task_types = {t};
  cfg.energy_profiles = {farm_profile(), farm_profile()};
  CHECK_NOTHROW(cfg.validate());

  ScenarioConfig bad = cfg;
  bad.iot_assignment[2] = 7;  // no such UAV
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.num_mec = 0;
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.energy_profiles.pop_back();
  CHECK_THROWS(bad.validate());

  bad = cfg;
  bad.task_types[0].proc_time_uav = -1;
  CHECK_THROWS(bad.validate());
}
