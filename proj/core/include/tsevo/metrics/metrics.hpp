#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsevo/events/events.hpp"
#include "tsevo/sim/simulation.hpp"

namespace tsevo::metrics {

struct RoutineWeights {
  double delay = 0.4;
  double queue = 0.4;
  double throughput = 0.2;
};

struct EventWeights {
  double event = 0.0;
  double normal = 0.0;
  double queue = 0.0;
};

// Emergency, transit and incident weights. Throws ConfigError for
// congestion, which has no event-specific fitness.
EventWeights event_weights(events::EventKind kind);

enum class FitnessMode { routine, event };

struct FitnessConfig {
  FitnessMode mode = FitnessMode::routine;
  events::EventKind kind = events::EventKind::emergency;  // event mode only
  double C = 0.0;
};

// f = C - (0.4 d + 0.4 q) + 0.2 t
double routine_fitness(const sim::SimulationMetrics& m, double C = 0.0);

// The event delay the fitness of `kind` uses: emergency_delay,
// bus_person_delay or incident_delay. Throws MissingMetric when absent.
double event_delay(const sim::SimulationMetrics& m, events::EventKind kind);
// Mean delay of the vehicles that are not of the event's class.
double normal_delay(const sim::SimulationMetrics& m, events::EventKind kind);

// f = C - (w_e d_e + w_n d_n + w_q q)
double event_fitness(const sim::SimulationMetrics& m, events::EventKind kind, double C = 0.0);

double fitness(const sim::SimulationMetrics& m, const FitnessConfig& cfg);

// Offset that makes a seed with raw fitness `seed_raw` positive: 0 when it
// already is, otherwise twice its magnitude (1 for a raw fitness of 0).
double default_offset(double seed_raw);

// Occupancy-weighted mean delay over every vehicle in the log.
double person_delay(std::span<const sim::VehicleRecord> log);

struct StatResult {
  double t = 0.0;
  double p = 1.0;  // two-tailed
  double d = 0.0;  // Cohen's d, pooled standard deviation
  double dof = 0.0;
  bool degenerate = false;  // both samples constant
};

// Welch's t-test and Cohen's d for mean(a) - mean(b). Constant samples with
// equal means give t = 0, p = 1, d = 0; constant samples with different
// means give t = d = +-inf and p = kSeparatedP.
StatResult welch_and_cohen(std::span<const double> a, std::span<const double> b);
inline constexpr double kSeparatedP = 1e-13;

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};
MeanStd mean_std(std::span<const double> values);

struct CostLedger {
  long llm_calls = 0;       // generator invocations including retries
  long sim_runs = 0;        // candidate episodes
  long reference_runs = 0;  // seed and baseline episodes
  double wall_clock = 0.0;  // seconds
};

// Counts "generated" and "evaluated" audit events. wall_clock is summed from
// session notes that carry an "elapsed" field.
CostLedger cost_ledger(std::span<const nlohmann::json> events, std::span<const nlohmann::json> sessions = {});

nlohmann::json to_json(const CostLedger& c);

}  // namespace tsevo::metrics
