#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsevo/events/events.hpp"
#include "tsevo/gen/generator.hpp"
#include "tsevo/metrics/metrics.hpp"
#include "tsevo/sim/scenario.hpp"
#include "tsevo/skill.hpp"
#include "tsevo/store/store.hpp"

namespace tsevo::evo {

struct EvolutionSignals {
  bool high_queue = false;
  bool low_throughput = false;
  bool high_delay = false;
  bool performance_gain = false;
  bool performance_decline = false;
  bool force_innovation = false;

  friend bool operator==(const EvolutionSignals&, const EvolutionSignals&) = default;
};

void to_json(nlohmann::json& j, const EvolutionSignals& s);
void from_json(const nlohmann::json& j, EvolutionSignals& s);

// Best-candidate metrics of earlier generations, oldest first.
struct MetricHistory {
  std::vector<double> queues;
  std::vector<double> delays;
  std::vector<double> throughputs;

  bool empty() const { return queues.empty(); }
  void push(const gen::MetricSummary& m);
};

struct SignalThresholds {
  double queue_p75 = 0.0;
  double delay_p75 = 0.0;
  double throughput_p25 = 0.0;
};

// Requires a nonempty history.
SignalThresholds signal_thresholds(const MetricHistory& history);

// Percentile signals compare `current` against the history and stay false
// while it is empty. `fitness_delta` is the change in best-candidate fitness
// from the previous generation; absent or zero sets neither gain nor decline.
EvolutionSignals extract_signals(const MetricHistory& history, const std::optional<gen::MetricSummary>& current,
                                 std::optional<double> fitness_delta, int stag, int tau);

// Direction strings of the active signals in table order, one per line;
// the neutral direction when none is active.
std::string direction_text(const EvolutionSignals& signals);

enum class Mode { routine, dispatcher_context };

struct EvolutionConfig {
  int population = 8;   // drafts requested per generation
  int generations = 30;
  int tau = 3;
  std::vector<sim::ScenarioConfig> scenarios;  // each run once, on its own seed
  Mode mode = Mode::routine;
  events::EventKind event_kind = events::EventKind::emergency;  // dispatcher_context only
  // Fitness offset C. Derived from the seed's raw fitness when unset.
  std::optional<double> offset;
  // Starting elite. Defaults to the minimal seed (routine) or the bank's
  // skill for the evolved kind (dispatcher_context).
  std::optional<Skill> initial;
  // Fixed skills for dispatcher_context; default_bank() when unset.
  std::optional<events::SkillBank> bank;
  int max_retries = 3;
  int jobs = 1;  // concurrent candidate evaluations
  // Test hook: return after this many generations as if interrupted.
  std::optional<int> stop_after;

  // Throws ConfigError.
  void check() const;
  // The fields that determine the run's outcome.
  nlohmann::json fingerprint() const;
};

struct GenerationRecord {
  int index = 0;
  std::vector<std::string> candidate_ids;
  std::vector<double> fitness;
  std::string best_id;       // elite after this generation
  double best_fitness = 0.0;
  double mean_fitness = 0.0;  // over candidates with finite fitness
  // Computed after ranking; they steer the next generation.
  EvolutionSignals signals;
  std::string direction;
  int stagnation = 0;
};

void to_json(nlohmann::json& j, const GenerationRecord& r);
void from_json(const nlohmann::json& j, GenerationRecord& r);

struct Capsule {
  Skill skill;
  double fitness = 0.0;
  nlohmann::json metrics;
  int generation = 0;
  std::uint64_t timestamp = 0;  // store sequence number of the capsule record
};

void to_json(nlohmann::json& j, const Capsule& c);
Capsule capsule_from_json(const nlohmann::json& j);

// Archives `skill` when its fitness exceeds every capsule already in the
// store; throws NotAnImprovement otherwise.
Capsule solidify(const Skill& skill, double fitness, const nlohmann::json& metrics, int generation,
                 store::AssetStore& store);

std::vector<Capsule> capsules(const store::AssetStore& store);

struct CandidateEvaluation {
  double fitness = 0.0;  // -inf when any episode failed
  std::vector<sim::SimulationMetrics> metrics;  // per scenario; empty on failure
  std::vector<sim::EpisodeLog> logs;            // when logs were requested
  std::optional<std::string> failure;

  gen::MetricSummary summary() const;
  nlohmann::json snapshot() const;
};

// Routine evaluation: the skill drives every intersection of each scenario.
CandidateEvaluation evaluate_routine(const Skill& skill, std::span<const sim::ScenarioConfig> scenarios, double offset,
                                     bool record_log = false);

// Substitutes `candidate` for the bank's `kind` skill and runs each scenario
// with the full detector and dispatcher. Fitness is the mean event fitness
// for `kind`; MissingMetric propagates when a scenario lacks the event.
CandidateEvaluation dispatcher_context_evaluate(const Skill& candidate, events::EventKind kind,
                                                const events::SkillBank& bank,
                                                std::span<const sim::ScenarioConfig> scenarios, double offset = 0.0,
                                                bool record_log = false);

struct EvolutionResult {
  Skill best;
  double best_fitness = 0.0;
  double seed_fitness = 0.0;
  int best_generation = 0;
  double offset = 0.0;
  std::vector<GenerationRecord> records;
  bool completed = false;  // false when stopped by stop_after
};

// Generate, test, evolve and solidify. When the store holds a checkpoint the
// run resumes from it: records after the checkpoint are dropped and the
// backend state is restored, so the continuation matches an uninterrupted
// run. GeneratorUnavailable propagates with the last checkpoint intact.
EvolutionResult run_evolution(const EvolutionConfig& config, gen::Backend& backend, store::AssetStore& store);

}  // namespace tsevo::evo
