#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsevo/dsl/interpreter.hpp"
#include "tsevo/dsl/validate.hpp"
#include "tsevo/events/events.hpp"
#include "tsevo/sim/simulation.hpp"

namespace tsevo::control {

struct PhaseScores {
  std::array<double, sim::kPhaseCount> scores{};
  int chosen = 0;
  bool preempt = false;  // set only by the handcrafted emergency override
};

// Smallest index attaining the maximum.
int argmax(std::span<const double> scores);

// Sums the inlane and outlane bodies over every lane-link of each phase with
// `index` bound to the phase. `extra` supplies event bindings; unset event
// variables read as 0. Throws EvalError if any evaluation fails.
PhaseScores score_phases(const dsl::CompiledSkill& skill, const sim::PhaseObservations& obs,
                         const dsl::EvalContext* extra = nullptr);

struct FixedTimePlan {
  double major = 25.0;  // through phases
  double minor = 5.0;   // protected left phases
  double yellow = 3.0;

  double cycle() const { return 2.0 * (major + minor) + 4.0 * yellow; }
  // Phase requested at time t. Requests switch `yellow` seconds before the
  // next green so each green lasts exactly its split.
  int phase_at(double t) const;
};

// Upstream waiting minus downstream waiting, summed per phase.
PhaseScores max_pressure(const sim::PhaseObservations& obs);

// Max pressure, except that an emergency event selects its phase at once.
PhaseScores handcrafted_preemption(const sim::PhaseObservations& obs, const std::vector<events::TrafficEvent>& events);

enum class ControllerKind { skill, dispatcher, fixed_time, max_pressure, handcrafted_preemption };

std::string_view kind_name(ControllerKind kind);
std::optional<ControllerKind> parse_controller_kind(std::string_view name);

struct ControllerSpec {
  ControllerKind kind = ControllerKind::max_pressure;
  // kind == skill. Compiled under the event whitelist.
  std::shared_ptr<const dsl::CompiledSkill> skill;
  // kind == skill: run the detector and bind the top event's context.
  bool event_aware = false;
  // kind == dispatcher.
  std::shared_ptr<const events::SkillBank> bank;
  FixedTimePlan plan;
  events::DetectorConfig detector;

  static ControllerSpec baseline(ControllerKind kind);
  static ControllerSpec for_skill(const Skill& skill, bool event_aware = false);
  static ControllerSpec for_bank(events::SkillBank bank);
  std::string label() const;
};

// A fresh controller with its own per-episode state.
sim::Controller make_controller(const ControllerSpec& spec);

sim::EpisodeResult drive(const ControllerSpec& spec, const sim::ScenarioConfig& scenario, std::uint64_t seed,
                         sim::EpisodeOptions options = {});

}  // namespace tsevo::control
