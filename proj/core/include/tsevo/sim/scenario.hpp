#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tsevo::sim {

struct TrafficParams {
  double jam_spacing = 7.5;      // m per queued vehicle
  double saturation_flow = 0.5;  // veh/s per lane while green
  double free_speed = 13.9;      // m/s
  double emergency_speed = 13.9; // m/s, ambulances keep to the link speed
  double min_green = 5.0;        // s
  double yellow = 3.0;           // s
  double straight_share = 0.7;   // probability a route crosses the grid without turning
  bool emergency_yield = true;   // queued traffic lets ambulances move up to the stop line
};

struct NetworkSpec {
  int rows = 4;
  int cols = 4;
  double link_length = 300.0;
};

// Arrival rates (veh/s per boundary source) from `start` until the next
// segment begins. North/south-bound and east/west-bound sources differ.
struct DemandSegment {
  double start = 0.0;
  double rate_ns = 0.0;
  double rate_ew = 0.0;
};

enum class InjectionKind { emergency, transit, incident };

std::string_view injection_name(InjectionKind kind);

// emergency: one ambulance per `interval`, departing mid-interval.
// transit: `lines` fixed bus routes, one bus per `interval` on each.
// incident: one vehicle breaks down in a lane at `start` for `duration`.
struct EventInjection {
  InjectionKind kind = InjectionKind::emergency;
  double interval = 300.0;
  int lines = 0;
  double start = 0.0;
  double duration = 0.0;
};

struct ScenarioConfig {
  std::string name = "custom";
  NetworkSpec network;
  double duration = 3600.0;
  double step = 1.0;
  std::vector<DemandSegment> demand;
  double perturbation = 0.0;  // per-source multipliers drawn from [1-p, 1+p]
  std::uint64_t perturbation_seed = 0;
  std::vector<EventInjection> events;
  std::uint64_t seed = 0;
  TrafficParams traffic;

  bool has(InjectionKind kind) const;
  const EventInjection* find(InjectionKind kind) const;
};

struct ScenarioOverrides {
  std::optional<int> rows;
  std::optional<int> cols;
  std::optional<double> duration;
  std::optional<double> link_length;
  std::optional<std::uint64_t> seed;
};

// 2x2 grid, 900 s.
ScenarioOverrides desk_scale();

// Families T1-T3 (routine demand), V1-V3 (perturbed T), E1/E2 (ambulances
// every 300/120 s), B1/B2 (two lines at 180 s / four lines at 120 s), I1
// (lane blocked from 600 s for 300 s), M1 (E1 + I1). Throws ConfigError for
// an unknown family.
ScenarioConfig make_scenario(const std::string& family, const ScenarioOverrides& overrides = {});

std::vector<std::string> scenario_families();

// Validates schedules against the duration; throws ConfigError.
void check_scenario(const ScenarioConfig& config);

// Scenario file (YAML): optional `family` base plus overriding keys
//   name, duration, seed, grid: {rows, cols, link_length},
//   demand: [{start, ns, ew}], perturbation, perturbation_seed,
//   events: [{kind, interval, lines, start, duration}]
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Resolves a family name, a "<family>@desk" shorthand or a file path.
ScenarioConfig resolve_scenario(const std::string& spec);

// Number of ambulances / buses the schedule injects.
int scheduled_emergencies(const ScenarioConfig& config);
int scheduled_buses(const ScenarioConfig& config);

void to_json(nlohmann::json& j, const ScenarioConfig& config);

}  // namespace tsevo::sim
