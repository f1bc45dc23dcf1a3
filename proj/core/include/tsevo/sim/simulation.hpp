#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsevo/dsl/ast.hpp"
#include "tsevo/sim/network.hpp"
#include "tsevo/sim/scenario.hpp"

namespace tsevo::sim {

enum class VehicleClass : std::uint8_t { normal, emergency, bus };

std::string_view class_name(VehicleClass c);
double occupancy(VehicleClass c);

enum class VehicleState : std::uint8_t { held, moving, queued, done };

struct Vehicle {
  int id = 0;
  VehicleClass vclass = VehicleClass::normal;
  std::vector<int> route;
  std::size_t leg = 0;  // index into route of the current link
  int lane = 0;
  double pos = 0.0;     // m from the start of the current link
  double speed = 0.0;
  VehicleState state = VehicleState::held;
  double entry_time = 0.0;
  std::optional<double> exit_time;
  double cumulative_wait = 0.0;
  double stopped_for = 0.0;  // consecutive seconds at standstill
  bool broken = false;

  int link() const { return route[leg]; }
  bool waiting() const { return state == VehicleState::queued || state == VehicleState::held; }
};

struct LaneObservation {
  int num_vehicle = 0;
  int num_waiting_vehicle = 0;
  double vehicle_dist = 0.0;
};

struct LaneLinkObservation {
  LaneObservation inlane;
  LaneObservation outlane;
};

using PhaseObservations = std::array<std::array<LaneLinkObservation, 2>, kPhaseCount>;

struct PhaseRequest {
  int phase = 0;
  bool preempt = false;  // bypasses min green (the yellow still applies)
};

struct SignalState {
  int phase = 0;
  int target = 0;          // phase that follows the running yellow
  int yellow_left = 0;     // seconds of all-red remaining
  double green_elapsed = 0.0;
  bool in_yellow() const { return yellow_left > 0; }
};

// An event observed at an intersection, as logged in the episode audit.
struct EventNote {
  std::string kind;
  std::vector<std::pair<dsl::VarId, double>> context;
};

// What a controller decided for one intersection at one step.
struct Decision {
  PhaseRequest request;
  std::vector<EventNote> events;
  std::string active;          // skill or rule that produced the request
  std::optional<std::string> fault;  // evaluation error; the phase was held
};

struct StepRecord {
  int time = 0;
  int intersection = 0;
  int phase = 0;
  bool yellow = false;
  int queue = 0;
  std::vector<EventNote> events;
  std::string active;
  std::optional<std::string> fault;
};

class EpisodeLog {
 public:
  void add(StepRecord record) { records_.push_back(std::move(record)); }
  const std::vector<StepRecord>& records() const { return records_; }
  // One JSON object per line: time, intersection, phase, queue, events, ...
  std::string to_jsonl() const;

 private:
  std::vector<StepRecord> records_;
};

struct VehicleRecord {
  int id = 0;
  VehicleClass vclass = VehicleClass::normal;
  double entry_time = 0.0;
  std::optional<double> exit_time;
  double delay = 0.0;
};

struct SimulationMetrics {
  double avg_delay = 0.0;
  double avg_queue = 0.0;
  double throughput = 0.0;
  std::optional<double> emergency_delay;
  std::optional<double> bus_person_delay;
  std::optional<double> incident_delay;
  // Delay sums and counts per vehicle class (normal, emergency, bus).
  std::array<double, 3> class_delay_sum{};
  std::array<int, 3> class_count{};
  int injected = 0;
  int faults = 0;
  std::vector<double> per_step_queues;
  std::vector<double> per_step_delays;

  // Mean delay over vehicles outside `excluded`.
  double mean_delay_excluding(std::optional<VehicleClass> excluded) const;
};

nlohmann::json to_json_summary(const SimulationMetrics& m);

struct EpisodeResult {
  SimulationMetrics metrics;
  std::vector<VehicleRecord> vehicles;
  EpisodeLog log;
};

class Simulation {
 public:
  Simulation(ScenarioConfig config, std::uint64_t seed);

  const ScenarioConfig& config() const { return config_; }
  const Network& network() const { return net_; }
  double time() const { return time_; }
  bool finished() const { return time_ >= config_.duration; }

  const SignalState& signal(int intersection) const { return signals_[static_cast<std::size_t>(intersection)]; }
  // True when lane-links of `phase` may discharge at this intersection.
  bool is_green(int intersection, int phase) const;

  // Advances one second. `requests` holds one entry per intersection.
  // An out-of-range phase is clamped to the current phase.
  void step(std::span<const PhaseRequest> requests);

  std::span<const Vehicle> vehicles() const { return vehicles_; }
  const Vehicle& vehicle(int id) const { return vehicles_[static_cast<std::size_t>(id)]; }
  // Vehicles on a lane, front (nearest the stop line) first.
  std::vector<int> lane_vehicles(int link, int lane) const;
  double vehicle_position(const Vehicle& v) const;
  // Stop-line position of a lane (the blockage point during an incident).
  double stop_position(int link, int lane) const;

  LaneObservation observe_lane(int link, int lane) const;
  LaneObservation observe_link(int link) const;
  PhaseObservations observe(int intersection) const;
  // Queued vehicles on all incoming lanes.
  int intersection_queue(int intersection) const;

  int clamp_warnings() const { return clamp_warnings_; }
  std::optional<int> incident_link() const { return incident_link_; }
  bool incident_active() const { return incident_active_; }

  SimulationMetrics metrics() const;
  std::vector<VehicleRecord> vehicle_log() const;

 private:
  struct Lane {
    std::deque<int> queue;   // front first
    std::vector<int> moving; // ordered by entry onto the lane
    double credit = 0.0;     // discharge allowance in vehicles
    double stop = 0.0;       // stop-line position
  };

  Lane& lane_ref(int link, int lane) { return lanes_[static_cast<std::size_t>(link * kLanesPerLink + lane)]; }
  const Lane& lane_ref(int link, int lane) const {
    return lanes_[static_cast<std::size_t>(link * kLanesPerLink + lane)];
  }
  int lane_count(int link, int lane) const;
  int lane_capacity(int link) const;
  int lane_for(const Vehicle& v, std::size_t leg) const;
  double source_rate(int entry_index) const;

  // Straight with probability straight_share, else a uniform single-turn route.
  std::vector<int> sample_route(std::size_t entry);
  int spawn(VehicleClass vclass, std::vector<int> route);
  bool try_enter(int vehicle_id);
  void advance_signals(std::span<const PhaseRequest> requests);
  void arrivals();
  void update_incident();
  void move_vehicles();
  void serve();
  void accumulate();

  ScenarioConfig config_;
  Network net_;
  std::mt19937_64 rng_;
  double time_ = 0.0;
  std::vector<SignalState> signals_;
  std::vector<Lane> lanes_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::deque<int>> backlog_;  // per entry link, vehicles waiting to enter
  std::vector<double> source_multiplier_;
  std::vector<std::vector<std::vector<int>>> turn_routes_;
  std::vector<std::vector<int>> straight_routes_;
  std::vector<std::pair<double, std::vector<int>>> bus_departures_;  // sorted by time
  std::size_t next_bus_ = 0;
  std::vector<double> emergency_departures_;
  std::size_t next_emergency_ = 0;
  std::optional<int> incident_link_;
  int incident_vehicle_ = -1;
  bool incident_active_ = false;
  int completed_ = 0;
  int clamp_warnings_ = 0;
  double queue_sum_ = 0.0;
  double incident_wait_ = 0.0;
  std::vector<double> per_step_queues_;
  std::vector<double> per_step_delays_;
};

// Called once per intersection per step, before the step executes.
using Controller = std::function<Decision(const Simulation&, int intersection)>;

struct EpisodeOptions {
  bool record_log = false;
};

// Runs the scenario for its full duration. An EvalError escaping the
// controller becomes EpisodeFailure.
EpisodeResult run_episode(const ScenarioConfig& scenario, const Controller& controller, std::uint64_t seed,
                          EpisodeOptions options = {});

}  // namespace tsevo::sim
