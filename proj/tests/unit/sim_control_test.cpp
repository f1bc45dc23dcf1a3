#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "listings.hpp"
#include "tsevo/control/control.hpp"
#include "tsevo/dsl/parser.hpp"

using namespace tsevo;
using namespace tsevo::sim;
using control::ControllerKind;
using control::ControllerSpec;

namespace {

ScenarioConfig empty_scenario(double duration = 600) {
  ScenarioConfig c;
  c.network = {1, 1, 300};
  c.duration = duration;
  return c;
}

ScenarioConfig desk(const std::string& family, double duration = 900) {
  auto o = desk_scale();
  o.duration = duration;
  return make_scenario(family, o);
}

PhaseObservations zeros() { return {}; }

}  // namespace

// Network and scenarios ----------------------------------------------------

TEST(Network, GridSizes) {
  const auto big = build_network(4, 4, 300);
  EXPECT_EQ(big.intersections.size(), 16u);
  for (const auto& i : big.intersections) EXPECT_EQ(i.phases.size(), 4u);
  const auto one = build_network(1, 1, 300);
  ASSERT_EQ(one.intersections.size(), 1u);
  for (int h = 0; h < 4; ++h) {
    EXPECT_TRUE(one.links[static_cast<std::size_t>(one.intersections[0].in_links[h])].is_entry());
  }
  const auto two = build_network(2, 2, 200);
  EXPECT_EQ(two.intersections.size(), 4u);
  int interior = 0;
  for (const auto& l : two.links) interior += !l.is_entry() && !l.is_exit();
  EXPECT_EQ(interior, 8);
  EXPECT_EQ(two.links.size(), 24u);
  EXPECT_EQ(two.segment_count(), 12);
  EXPECT_EQ(two.entry_links.size(), 8u);
  EXPECT_THROW(build_network(0, 2, 300), ConfigError);
}

TEST(Scenario, Families) {
  EXPECT_EQ(scheduled_emergencies(make_scenario("E2")), 30);
  EXPECT_EQ(scheduled_emergencies(make_scenario("E1")), 12);
  const auto t1 = make_scenario("T1");
  const auto v1 = make_scenario("V1");
  EXPECT_DOUBLE_EQ(v1.perturbation, 0.15);
  ASSERT_EQ(v1.demand.size(), t1.demand.size());
  EXPECT_DOUBLE_EQ(v1.demand[0].rate_ns, t1.demand[0].rate_ns);
  EXPECT_THROW(make_scenario("Z9"), ConfigError);
  const auto d = make_scenario("T1", desk_scale());
  EXPECT_EQ(d.network.rows, 2);
  EXPECT_DOUBLE_EQ(d.duration, 900);
  EXPECT_EQ(resolve_scenario("T2@desk").network.cols, 2);
}

TEST(Scenario, YamlFile) {
  const auto path = std::filesystem::temp_directory_path() / "tsevo_scenario.yaml";
  std::ofstream(path) << "family: E1\nname: mine\nduration: 600\ngrid: {rows: 1, cols: 2}\n"
                         "events:\n  - {kind: emergency, interval: 200}\n";
  const auto c = load_scenario(path);
  EXPECT_EQ(c.name, "mine");
  EXPECT_EQ(c.network.cols, 2);
  EXPECT_EQ(scheduled_emergencies(c), 3);
  std::ofstream(path) << "duration: 100\nevents:\n  - {kind: incident, start: 90, duration: 50}\n";
  EXPECT_THROW(load_scenario(path), ConfigError);
  std::filesystem::remove(path);
}

// Simulation ---------------------------------------------------------------

TEST(Simulation, EmptyNetworkOnlyAdvancesClock) {
  Simulation s(empty_scenario(), 1);
  std::vector<PhaseRequest> req(1, PhaseRequest{2, false});
  s.step(req);
  EXPECT_DOUBLE_EQ(s.time(), 1.0);
  EXPECT_TRUE(s.vehicles().empty());
}

TEST(Simulation, YellowBeforeNewPhase) {
  Simulation s(empty_scenario(), 1);
  std::vector<PhaseRequest> keep(1, PhaseRequest{0, false});
  for (int i = 0; i < 6; ++i) s.step(keep);
  std::vector<PhaseRequest> change(1, PhaseRequest{2, false});
  int yellow_steps = 0;
  for (int i = 0; i < 5; ++i) {
    s.step(change);
    if (s.signal(0).in_yellow()) ++yellow_steps;
  }
  EXPECT_EQ(s.signal(0).phase, 2);
  EXPECT_TRUE(s.is_green(0, 2));
  EXPECT_FALSE(s.is_green(0, 0));
  EXPECT_EQ(yellow_steps, 3);
}

TEST(Simulation, ZeroDemandAndDeterminism) {
  const auto idle = run_episode(empty_scenario(), [](const Simulation&, int) { return Decision{}; }, 3);
  EXPECT_EQ(idle.metrics.avg_delay, 0.0);
  EXPECT_EQ(idle.metrics.throughput, 0.0);

  const auto sc = desk("T1", 600);
  const auto spec = ControllerSpec::baseline(ControllerKind::max_pressure);
  const auto a = control::drive(spec, sc, 4).metrics;
  const auto b = control::drive(spec, sc, 4).metrics;
  EXPECT_EQ(a.avg_delay, b.avg_delay);
  EXPECT_EQ(a.throughput, b.throughput);
  EXPECT_EQ(a.per_step_queues, b.per_step_queues);
  const auto c = control::drive(spec, sc, 5).metrics;
  EXPECT_NE(a.per_step_queues, c.per_step_queues);
}

TEST(Simulation, ObservationsMatchVehicleStates) {
  const auto sc = desk("T2", 400);
  Simulation s(sc, 2);
  std::vector<PhaseRequest> req(s.network().intersections.size(), PhaseRequest{0, false});
  for (int t = 0; t < 400; ++t) {
    s.step(req);
    if (t % 50 != 49) continue;
    for (const auto& l : s.network().links) {
      for (int lane = 0; lane < kLanesPerLink; ++lane) {
        const auto ids = s.lane_vehicles(l.id, lane);
        const auto o = s.observe_lane(l.id, lane);
        EXPECT_EQ(o.num_vehicle, static_cast<int>(ids.size()));
        int waiting = 0;
        for (int id : ids) waiting += s.vehicle(id).waiting();
        EXPECT_EQ(o.num_waiting_vehicle, waiting);
      }
    }
  }
}

// Controllers --------------------------------------------------------------

TEST(Score, SeedSumsWaitingCounts) {
  auto compiled = dsl::compile_skill(seed_skill(), dsl::VariableWhitelist::lane());
  auto obs = zeros();
  obs[1][0].inlane.num_waiting_vehicle = 3;
  obs[1][1].inlane.num_waiting_vehicle = 2;
  const auto r = control::score_phases(compiled, obs);
  EXPECT_DOUBLE_EQ(r.scores[1], 5.0);
  EXPECT_EQ(r.chosen, 1);
  EXPECT_EQ(control::score_phases(compiled, zeros()).chosen, 0);
}

TEST(Score, EmergencySkillDominates) {
  auto compiled = dsl::compile_skill(listings::emergency(), dsl::VariableWhitelist::with_events());
  dsl::EvalContext extra;
  extra.bind(dsl::VarId::emergency_distance, 100);
  extra.bind(dsl::VarId::emergency_phase, 2);
  auto obs = zeros();
  obs[0][0].inlane.num_waiting_vehicle = 20;
  const auto r = control::score_phases(compiled, obs, &extra);
  EXPECT_DOUBLE_EQ(r.scores[2], 2 * 100.0 * 10);
  EXPECT_EQ(r.chosen, 2);
}

TEST(Score, FaultIsEvalError) {
  auto compiled = dsl::compile_skill(listings::make("x", "value[0] += 1 / num_vehicle", "value[0] += 0"),
                                     dsl::VariableWhitelist::lane());
  EXPECT_THROW(control::score_phases(compiled, zeros()), EvalError);
}

TEST(FixedTime, Plan) {
  control::FixedTimePlan p;
  for (int t = 0; t < 25; ++t) EXPECT_EQ(p.phase_at(t), 0) << t;
  for (int t = 25; t < 33; ++t) EXPECT_EQ(p.phase_at(t), 1) << t;
  EXPECT_EQ(p.phase_at(33), 2);
  EXPECT_EQ(p.phase_at(61), 3);
  EXPECT_DOUBLE_EQ(p.cycle(), 72.0);
  EXPECT_EQ(p.phase_at(72), 0);

  // Green for 0..24, then three seconds of yellow.
  Simulation s(empty_scenario(), 1);
  const auto ctl = control::make_controller(ControllerSpec::baseline(ControllerKind::fixed_time));
  std::vector<int> yellows;
  for (int t = 0; t < 30; ++t) {
    std::vector<PhaseRequest> req{ctl(s, 0).request};
    s.step(req);
    if (s.signal(0).in_yellow()) yellows.push_back(t);
  }
  EXPECT_EQ(yellows, (std::vector<int>{25, 26, 27}));
}

TEST(FixedTime, OpenLoopAndSynchronised) {
  const auto sc = desk("T1", 200);
  auto spec = ControllerSpec::baseline(ControllerKind::fixed_time);
  Simulation s(sc, 1);
  auto ctl = control::make_controller(spec);
  for (int t = 0; t < 200; ++t) {
    std::vector<PhaseRequest> req;
    for (int i = 0; i < 4; ++i) req.push_back(ctl(s, i).request);
    for (int i = 1; i < 4; ++i) EXPECT_EQ(req[static_cast<std::size_t>(i)].phase, req[0].phase);
    EXPECT_EQ(req[0].phase, spec.plan.phase_at(t));
    s.step(req);
  }
}

TEST(MaxPressure, Arithmetic) {
  auto obs = zeros();
  obs[3][0].inlane.num_waiting_vehicle = 5;
  obs[3][1].inlane.num_waiting_vehicle = 3;
  obs[3][0].outlane.num_waiting_vehicle = 1;
  obs[3][1].outlane.num_waiting_vehicle = 2;
  const auto r = control::max_pressure(obs);
  EXPECT_DOUBLE_EQ(r.scores[3], 5.0);
  EXPECT_EQ(r.chosen, 3);
  EXPECT_EQ(control::max_pressure(zeros()).chosen, 0);
}

TEST(Handcrafted, EmergencyOverridesPressure) {
  auto obs = zeros();
  obs[0][0].inlane.num_waiting_vehicle = 9;
  events::TrafficEvent ev{events::EventKind::emergency, 0, {{dsl::VarId::emergency_distance, 80}, {dsl::VarId::emergency_phase, 3}}};
  events::TrafficEvent cong{events::EventKind::congestion, 0, {{dsl::VarId::congestion_level, 2}}};
  const auto r = control::handcrafted_preemption(obs, {cong, ev});
  EXPECT_EQ(r.chosen, 3);
  EXPECT_TRUE(r.preempt);
  const auto none = control::handcrafted_preemption(obs, {});
  EXPECT_EQ(none.chosen, control::max_pressure(obs).chosen);
  EXPECT_FALSE(none.preempt);
}

TEST(Controllers, SkillOnZeroDemand) {
  const auto r = control::drive(ControllerSpec::for_skill(seed_skill()), empty_scenario(), 1);
  EXPECT_EQ(r.metrics.avg_delay, 0.0);
}

TEST(Controllers, FaultHoldsPhase) {
  const auto bad = listings::make("bad", "value[0] += 1 / (num_waiting_vehicle - 2)", "value[0] += 0");
  const auto r = control::drive(ControllerSpec::for_skill(bad), desk("T1", 300), 1, {true});
  EXPECT_GT(r.metrics.faults, 0);
  const auto& recs = r.log.records();
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (!recs[k].fault || k < 4) continue;
    const auto& prev = recs[k - 4];  // same intersection, previous step
    ASSERT_EQ(prev.intersection, recs[k].intersection);
    if (!prev.yellow && !recs[k].yellow) EXPECT_EQ(recs[k].phase, prev.phase);
  }
}

TEST(Controllers, MaxPressureBeatsFixedTime) {
  const auto sc = desk("T1");
  const auto ft = control::drive(ControllerSpec::baseline(ControllerKind::fixed_time), sc, 1).metrics;
  const auto mp = control::drive(ControllerSpec::baseline(ControllerKind::max_pressure), sc, 1).metrics;
  EXPECT_LT(mp.avg_delay, ft.avg_delay);
}

TEST(Controllers, KindNames) {
  for (auto k : {ControllerKind::fixed_time, ControllerKind::max_pressure, ControllerKind::handcrafted_preemption,
                 ControllerKind::skill, ControllerKind::dispatcher}) {
    EXPECT_EQ(control::parse_controller_kind(control::kind_name(k)), k);
  }
  EXPECT_FALSE(control::parse_controller_kind("nope"));
}

TEST(Controllers, MinGreenBetweenChanges) {
  const auto r = control::drive(ControllerSpec::baseline(ControllerKind::max_pressure), desk("T3", 900), 2, {true});
  std::map<int, int> last_yellow_start;
  std::map<int, bool> was_yellow;
  int changes = 0;
  for (const auto& rec : r.log.records()) {
    if (rec.yellow && !was_yellow[rec.intersection]) {
      if (last_yellow_start.count(rec.intersection)) {
        EXPECT_GE(rec.time - last_yellow_start[rec.intersection], 3 + 5);
      }
      last_yellow_start[rec.intersection] = rec.time;
      ++changes;
    }
    was_yellow[rec.intersection] = rec.yellow;
  }
  EXPECT_GT(changes, 10);
}

TEST(Score, PositiveScalingKeepsChoice) {
  auto base = dsl::compile_skill(listings::gen19_full(), dsl::VariableWhitelist::lane());
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(0, 12);
  for (int trial = 0; trial < 200; ++trial) {
    PhaseObservations obs{};
    for (auto& phase : obs) {
      for (auto& ll : phase) {
        ll.inlane.num_vehicle = count(rng);
        ll.inlane.num_waiting_vehicle = std::min(ll.inlane.num_vehicle, count(rng));
        ll.inlane.vehicle_dist = count(rng) * 10.0;
        ll.outlane.num_vehicle = count(rng);
        ll.outlane.vehicle_dist = count(rng) * 10.0;
      }
    }
    const auto r = control::score_phases(base, obs);
    std::array<double, kPhaseCount> scaled{};
    for (int k = 0; k < kPhaseCount; ++k) scaled[static_cast<std::size_t>(k)] = r.scores[static_cast<std::size_t>(k)] * 3.5;
    EXPECT_EQ(control::argmax(scaled), r.chosen);
  }
}

TEST(Baselines, EventBlind) {
  auto obs = zeros();
  obs[2][1].inlane.num_waiting_vehicle = 4;
  const auto with = control::max_pressure(obs);
  events::TrafficEvent ev{events::EventKind::emergency, 0, {{dsl::VarId::emergency_distance, 50}, {dsl::VarId::emergency_phase, 0}}};
  EXPECT_EQ(control::handcrafted_preemption(obs, {}).chosen, with.chosen);
  EXPECT_NE(control::handcrafted_preemption(obs, {ev}).chosen, with.chosen);
}

TEST(Handcrafted, CutsEmergencyDelay) {
  const auto sc = desk("E1", 1800);
  const auto mp = control::drive(ControllerSpec::baseline(ControllerKind::max_pressure), sc, 1).metrics;
  const auto hp = control::drive(ControllerSpec::baseline(ControllerKind::handcrafted_preemption), sc, 1).metrics;
  ASSERT_TRUE(mp.emergency_delay && hp.emergency_delay);
  EXPECT_LE(*hp.emergency_delay, 0.4 * *mp.emergency_delay);
}
