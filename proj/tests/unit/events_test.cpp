#include <gtest/gtest.h>

#include <random>

#include "tsevo/control/control.hpp"
#include "tsevo/events/events.hpp"
#include "tsevo/util/percentile.hpp"

using namespace tsevo;
using namespace tsevo::events;
using dsl::VarId;

namespace {

TrafficEvent event_of(EventKind kind) { return {kind, 0, {}}; }

sim::ScenarioConfig desk(const std::string& family, double duration) {
  auto o = sim::desk_scale();
  o.duration = duration;
  return sim::make_scenario(family, o);
}

// Runs a max-pressure episode and calls `visit` before every step.
template <typename Visit>
void walk(const sim::ScenarioConfig& sc, std::uint64_t seed, Visit visit) {
  sim::Simulation s(sc, seed);
  const auto n = s.network().intersections.size();
  while (!s.finished()) {
    std::vector<sim::PhaseRequest> req;
    for (std::size_t i = 0; i < n; ++i) {
      visit(s, static_cast<int>(i));
      req.push_back({control::max_pressure(s.observe(static_cast<int>(i))).chosen, false});
    }
    s.step(req);
  }
}

double context_value(const TrafficEvent& e, VarId var) {
  for (const auto& [k, v] : e.context) {
    if (k == var) return v;
  }
  return -1;
}

const TrafficEvent* find_kind(const std::vector<TrafficEvent>& events, EventKind kind) {
  for (const auto& e : events) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

}  // namespace

TEST(Dispatch, EverySubsetPicksHighestPriority) {
  const auto bank = default_bank();
  EXPECT_EQ(dispatch({}, bank).first, SkillKind::normal);
  for (int mask = 1; mask < 16; ++mask) {
    std::vector<TrafficEvent> evs;
    // Insert lowest priority first so order cannot decide the result.
    for (int k = 3; k >= 0; --k) {
      if (mask & (1 << k)) evs.push_back(event_of(kEventKinds[static_cast<std::size_t>(k)]));
    }
    int best = 0;
    while (!(mask & (1 << best))) ++best;
    const auto [kind, skill] = dispatch(evs, bank);
    EXPECT_EQ(kind, skill_for(kEventKinds[static_cast<std::size_t>(best)])) << mask;
    EXPECT_EQ(skill, &bank.get(kind));
  }
  EXPECT_EQ(dispatch_kind({event_of(EventKind::emergency), event_of(EventKind::incident)}), SkillKind::emergency);
  EXPECT_EQ(dispatch_kind({event_of(EventKind::congestion), event_of(EventKind::transit)}), SkillKind::transit);
}

TEST(Dispatch, BankCompleteness) {
  SkillBank bank;
  EXPECT_FALSE(bank.complete());
  EXPECT_THROW(bank.get(SkillKind::normal), ConfigError);
  EXPECT_TRUE(default_bank().complete());
  for (auto k : kSkillKinds) EXPECT_EQ(parse_skill_kind(kind_name(k)), k);
}

TEST(Inject, EmergencyTransitAndNone) {
  TrafficEvent ev{EventKind::emergency, 0, {{VarId::emergency_distance, 150}, {VarId::emergency_phase, 2}}};
  auto ctx = inject_context(&ev, {});
  EXPECT_EQ(ctx.get(VarId::emergency_distance), 150);
  EXPECT_EQ(ctx.get(VarId::emergency_phase), 2);
  EXPECT_EQ(ctx.get(VarId::bus_count), 0);

  TrafficEvent bus{EventKind::transit, 0, {{VarId::bus_count, 2}, {VarId::bus_delay, 37}}};
  ctx = inject_context(&bus, {});
  EXPECT_EQ(ctx.get(VarId::bus_count), 2);
  EXPECT_EQ(ctx.get(VarId::bus_delay), 37);
  EXPECT_EQ(ctx.get(VarId::emergency_distance), 0);
  EXPECT_EQ(ctx.get(VarId::incident_blocked), 0);

  ctx = inject_context(nullptr, {});
  for (auto v : {VarId::emergency_distance, VarId::emergency_phase, VarId::bus_count, VarId::bus_delay,
                 VarId::incident_blocked, VarId::congestion_level}) {
    EXPECT_TRUE(ctx.is_bound(v));
    EXPECT_EQ(ctx.get(v), 0);
  }
}

TEST(Inject, LeavesLaneBindingsAlone) {
  dsl::EvalContext base;
  base.bind(VarId::num_vehicle, 4);
  base.bind(VarId::num_waiting_vehicle, 3);
  base.bind(VarId::index, 1);
  TrafficEvent ev{EventKind::congestion, 0, {{VarId::congestion_level, 2}}};
  const auto ctx = inject_context(&ev, base);
  EXPECT_EQ(ctx.get(VarId::num_vehicle), 4);
  EXPECT_EQ(ctx.get(VarId::num_waiting_vehicle), 3);
  EXPECT_EQ(ctx.get(VarId::index), 1);
  EXPECT_EQ(ctx.get(VarId::congestion_level), 2);
}

TEST(Congestion, ColdStartAndBins) {
  DetectorConfig cfg;
  QueueHistory short_history(299, 1.0);
  EXPECT_FALSE(congestion_level(100, short_history, cfg));
  QueueHistory h;
  for (int i = 0; i < 300; ++i) h.push_back(i % 100);  // P90 = 89.1, max 99
  EXPECT_FALSE(congestion_level(89, h, cfg));
  EXPECT_EQ(congestion_level(90, h, cfg), 0);
  EXPECT_EQ(congestion_level(92, h, cfg), 1);
  EXPECT_EQ(congestion_level(97, h, cfg), 3);
  EXPECT_EQ(congestion_level(500, h, cfg), 3);
}

TEST(Congestion, ThresholdMatchesBruteForce) {
  DetectorConfig cfg;
  cfg.congestion_window = 20;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> q(0, 30);
  for (int trial = 0; trial < 200; ++trial) {
    QueueHistory h;
    const int n = 20 + trial % 15;
    for (int i = 0; i < n; ++i) h.push_back(q(rng));
    std::vector<double> w(h.end() - 20, h.end());
    std::sort(w.begin(), w.end());
    const double pos = 0.9 * 19;
    const double p90 = w[17] + (w[18] - w[17]) * (pos - 17);
    const double current = q(rng);
    EXPECT_EQ(congestion_level(current, h, cfg).has_value(), current > p90) << trial;
  }
}

TEST(Detect, EmergencyMatchesVehicleScan) {
  int seen = 0;
  walk(desk("E1", 900), 1, [&](const sim::Simulation& s, int i) {
    const auto& node = s.network().intersections[static_cast<std::size_t>(i)];
    std::optional<double> nearest;
    for (const auto& v : s.vehicles()) {
      if (v.vclass != sim::VehicleClass::emergency || v.state == sim::VehicleState::held ||
          v.state == sim::VehicleState::done) {
        continue;
      }
      bool upstream = false;
      for (int l : node.in_links) upstream |= v.link() == l;
      if (!upstream) continue;
      const double d = s.network().links[static_cast<std::size_t>(v.link())].length - s.vehicle_position(v);
      if (d <= 200 && (!nearest || d < *nearest)) nearest = d;
    }
    const auto events = detect(s, i, {});
    const auto* e = find_kind(events, EventKind::emergency);
    ASSERT_EQ(e != nullptr, nearest.has_value()) << "t=" << s.time();
    if (!e) return;
    ++seen;
    EXPECT_DOUBLE_EQ(context_value(*e, VarId::emergency_distance), std::max(1.0, *nearest));
    DetectorConfig narrow;
    narrow.emergency_radius = 100;
    if (*nearest > 100) EXPECT_FALSE(find_kind(detect(s, i, {}, narrow), EventKind::emergency));
  });
  EXPECT_GT(seen, 0);
}

TEST(Detect, IncidentOnlyWhenLaneBlocked) {
  bool fired = false;
  walk(desk("I1", 900), 1, [&](const sim::Simulation& s, int i) {
    const bool incident = find_kind(detect(s, i, {}), EventKind::incident) != nullptr;
    if (incident) {
      EXPECT_GE(s.time(), 600 + 120);
      fired = true;
    }
  });
  EXPECT_TRUE(fired);
  walk(desk("T1", 900), 1, [&](const sim::Simulation& s, int i) {
    EXPECT_FALSE(find_kind(detect(s, i, {}), EventKind::incident)) << "t=" << s.time();
  });
}

TEST(Detect, TransitCountsBuses) {
  int seen = 0;
  walk(desk("B1", 600), 1, [&](const sim::Simulation& s, int i) {
    const auto events = detect(s, i, {});
    const auto* e = find_kind(events, EventKind::transit);
    if (!e) return;
    ++seen;
    EXPECT_GE(context_value(*e, VarId::bus_count), 1);
    EXPECT_GE(context_value(*e, VarId::bus_delay), 0);
  });
  EXPECT_GT(seen, 0);
}
