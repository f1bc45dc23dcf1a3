#pragma once

#include <array>
#include <deque>
#include <map>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "tsevo/dsl/interpreter.hpp"
#include "tsevo/dsl/validate.hpp"
#include "tsevo/sim/simulation.hpp"

namespace tsevo::events {

// Listed from highest to lowest priority (P0..P3).
enum class EventKind { emergency, incident, transit, congestion };
inline constexpr std::array<EventKind, 4> kEventKinds = {EventKind::emergency, EventKind::incident,
                                                         EventKind::transit, EventKind::congestion};

// The skill slot selected by the dispatcher; `normal` when no event is active.
enum class SkillKind { normal, emergency, incident, transit, congestion };
inline constexpr std::array<SkillKind, 5> kSkillKinds = {SkillKind::normal, SkillKind::emergency, SkillKind::incident,
                                                         SkillKind::transit, SkillKind::congestion};

int priority(EventKind kind);  // 0 is highest
std::string_view kind_name(EventKind kind);
std::string_view kind_name(SkillKind kind);
SkillKind skill_for(EventKind kind);
std::optional<SkillKind> parse_skill_kind(std::string_view name);

struct TrafficEvent {
  EventKind kind = EventKind::emergency;
  int intersection = 0;
  std::vector<std::pair<dsl::VarId, double>> context;

  sim::EventNote note() const;
};

struct DetectorConfig {
  double emergency_radius = 200.0;
  double incident_stop_threshold = 120.0;
  double signal_stop_radius = 50.0;
  double congestion_percentile = 90.0;
  std::size_t congestion_window = 300;
};

// Trailing per-intersection queue lengths, one sample per step.
using QueueHistory = std::deque<double>;

// Events at one intersection. The congestion rule compares the current
// queue against `history` and stays silent until the window is full.
std::vector<TrafficEvent> detect(const sim::Simulation& sim, int intersection, const QueueHistory& history,
                                 const DetectorConfig& config = {});

// Congestion severity for a queue above the window's P90: the number of
// quartile marks of [P90, max] that it exceeds, capped at 3.
std::optional<int> congestion_level(double current, const QueueHistory& history, const DetectorConfig& config);

// Keeps the queue histories of every intersection for one episode.
class Detector {
 public:
  explicit Detector(DetectorConfig config = {}) : config_(config) {}
  // Detects, then appends the current queue to the intersection's history.
  std::vector<TrafficEvent> observe(const sim::Simulation& sim, int intersection);
  const DetectorConfig& config() const { return config_; }

 private:
  DetectorConfig config_;
  std::vector<QueueHistory> history_;
};

class SkillBank {
 public:
  // Validates under the event whitelist; throws dsl::InvalidSkill.
  void set(SkillKind kind, const Skill& skill);
  const dsl::CompiledSkill& get(SkillKind kind) const;
  bool complete() const;

 private:
  std::map<SkillKind, dsl::CompiledSkill> skills_;
};

// The routine gen-19 skill and the four reference event skills
// (the congestion entry is the hand-tuned saturation rule).
SkillBank default_bank();
Skill default_skill(SkillKind kind);

// Highest-priority event, or nullptr for an empty set.
const TrafficEvent* top_event(const std::vector<TrafficEvent>& events);
SkillKind dispatch_kind(const std::vector<TrafficEvent>& events);
std::pair<SkillKind, const dsl::CompiledSkill*> dispatch(const std::vector<TrafficEvent>& events,
                                                         const SkillBank& bank);

// Binds the six event variables: the event's own values, 0 for the rest.
// Existing lane bindings are left untouched.
dsl::EvalContext inject_context(const TrafficEvent* event, dsl::EvalContext base);

}  // namespace tsevo::events
