#include "tsevo/control/control.hpp"

#include <cmath>

#include "tsevo/error.hpp"

namespace tsevo::control {

using dsl::VarId;

namespace {

constexpr VarId kEventVars[] = {VarId::emergency_distance, VarId::emergency_phase, VarId::bus_count,
                                VarId::bus_delay,          VarId::incident_blocked, VarId::congestion_level};

void bind_lane(dsl::EvalContext& ctx, const sim::LaneObservation& lane, bool waiting) {
  ctx.bind(VarId::num_vehicle, lane.num_vehicle);
  ctx.bind(VarId::vehicle_dist, lane.vehicle_dist);
  if (waiting) ctx.bind(VarId::num_waiting_vehicle, lane.num_waiting_vehicle);
}

// The phase a signal is heading to: the target during yellow.
int current_phase(const sim::SignalState& s) { return s.in_yellow() ? s.target : s.phase; }

PhaseScores finish(PhaseScores scores) {
  scores.chosen = argmax(scores.scores);
  return scores;
}

}  // namespace

int argmax(std::span<const double> scores) {
  int best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

PhaseScores score_phases(const dsl::CompiledSkill& skill, const sim::PhaseObservations& obs,
                         const dsl::EvalContext* extra) {
  dsl::EvalContext base;
  for (auto var : kEventVars) base.bind(var, extra && extra->is_bound(var) ? extra->get(var) : 0.0);
  PhaseScores out;
  for (int k = 0; k < sim::kPhaseCount; ++k) {
    base.bind(VarId::index, k);
    double total = 0.0;
    for (const auto& ll : obs[static_cast<std::size_t>(k)]) {
      dsl::EvalContext in = base;
      bind_lane(in, ll.inlane, true);
      total += dsl::evaluate(skill.inlane, in);
      dsl::EvalContext outc = base;
      bind_lane(outc, ll.outlane, false);
      total += dsl::evaluate(skill.outlane, outc);
    }
    if (!std::isfinite(total)) throw EvalError("phase score is not finite");
    out.scores[static_cast<std::size_t>(k)] = total;
  }
  return finish(out);
}

int FixedTimePlan::phase_at(double t) const {
  const double c = std::fmod(t, cycle());
  const double marks[] = {major, major + yellow + minor, 2 * major + 2 * yellow + minor,
                          2 * major + 3 * yellow + 2 * minor};
  if (c < marks[0]) return 0;
  if (c < marks[1]) return 1;
  if (c < marks[2]) return 2;
  if (c < marks[3]) return 3;
  return 0;
}

PhaseScores max_pressure(const sim::PhaseObservations& obs) {
  PhaseScores out;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    for (const auto& ll : obs[k]) {
      out.scores[k] += ll.inlane.num_waiting_vehicle - ll.outlane.num_waiting_vehicle;
    }
  }
  return finish(out);
}

PhaseScores handcrafted_preemption(const sim::PhaseObservations& obs,
                                   const std::vector<events::TrafficEvent>& detected) {
  const auto* top = events::top_event(detected);
  if (top && top->kind == events::EventKind::emergency) {
    for (const auto& [var, value] : top->context) {
      if (var != VarId::emergency_phase) continue;
      PhaseScores out = max_pressure(obs);
      out.chosen = static_cast<int>(value);
      out.preempt = true;
      return out;
    }
  }
  return max_pressure(obs);
}

std::string_view kind_name(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::skill: return "skill";
    case ControllerKind::dispatcher: return "dispatcher";
    case ControllerKind::fixed_time: return "fixed_time";
    case ControllerKind::max_pressure: return "max_pressure";
    case ControllerKind::handcrafted_preemption: return "handcrafted_preemption";
  }
  return "?";
}

std::optional<ControllerKind> parse_controller_kind(std::string_view name) {
  for (auto k : {ControllerKind::skill, ControllerKind::dispatcher, ControllerKind::fixed_time,
                 ControllerKind::max_pressure, ControllerKind::handcrafted_preemption}) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

ControllerSpec ControllerSpec::baseline(ControllerKind kind) {
  if (kind == ControllerKind::skill || kind == ControllerKind::dispatcher) {
    throw ConfigError(std::string(kind_name(kind)) + " is not a baseline controller");
  }
  ControllerSpec spec;
  spec.kind = kind;
  return spec;
}

ControllerSpec ControllerSpec::for_skill(const Skill& skill, bool event_aware) {
  ControllerSpec spec;
  spec.kind = ControllerKind::skill;
  spec.skill = std::make_shared<const dsl::CompiledSkill>(
      dsl::compile_skill(skill, dsl::VariableWhitelist::with_events()));
  spec.event_aware = event_aware;
  return spec;
}

ControllerSpec ControllerSpec::for_bank(events::SkillBank bank) {
  if (!bank.complete()) throw ConfigError("skill bank is missing entries");
  ControllerSpec spec;
  spec.kind = ControllerKind::dispatcher;
  spec.bank = std::make_shared<const events::SkillBank>(std::move(bank));
  return spec;
}

std::string ControllerSpec::label() const {
  if (kind == ControllerKind::skill && skill) return "skill:" + skill->skill.id;
  return std::string(kind_name(kind));
}

sim::Controller make_controller(const ControllerSpec& spec) {
  switch (spec.kind) {
    case ControllerKind::fixed_time:
      return [plan = spec.plan](const sim::Simulation& s, int) {
        return sim::Decision{{plan.phase_at(s.time()), false}, {}, "fixed_time", std::nullopt};
      };
    case ControllerKind::max_pressure:
      return [](const sim::Simulation& s, int i) {
        return sim::Decision{{max_pressure(s.observe(i)).chosen, false}, {}, "max_pressure", std::nullopt};
      };
    case ControllerKind::handcrafted_preemption: {
      auto detector = std::make_shared<events::Detector>(spec.detector);
      return [detector](const sim::Simulation& s, int i) {
        const auto detected = detector->observe(s, i);
        const auto scores = handcrafted_preemption(s.observe(i), detected);
        sim::Decision d{{scores.chosen, scores.preempt}, {}, scores.preempt ? "preempt" : "max_pressure", std::nullopt};
        for (const auto& e : detected) d.events.push_back(e.note());
        return d;
      };
    }
    case ControllerKind::skill: {
      if (!spec.skill) throw ConfigError("skill controller needs a skill");
      auto detector = spec.event_aware ? std::make_shared<events::Detector>(spec.detector) : nullptr;
      return [skill = spec.skill, detector](const sim::Simulation& s, int i) {
        sim::Decision d;
        d.active = skill->skill.id;
        std::vector<events::TrafficEvent> detected;
        if (detector) detected = detector->observe(s, i);
        for (const auto& e : detected) d.events.push_back(e.note());
        try {
          const auto ctx = events::inject_context(events::top_event(detected), {});
          d.request.phase = score_phases(*skill, s.observe(i), &ctx).chosen;
        } catch (const EvalError& e) {
          d.request.phase = current_phase(s.signal(i));
          d.fault = e.what();
        }
        return d;
      };
    }
    case ControllerKind::dispatcher: {
      if (!spec.bank) throw ConfigError("dispatcher controller needs a skill bank");
      auto detector = std::make_shared<events::Detector>(spec.detector);
      return [bank = spec.bank, detector](const sim::Simulation& s, int i) {
        sim::Decision d;
        const auto detected = detector->observe(s, i);
        for (const auto& e : detected) d.events.push_back(e.note());
        const auto [kind, skill] = events::dispatch(detected, *bank);
        d.active = std::string(events::kind_name(kind));
        try {
          const auto ctx = events::inject_context(events::top_event(detected), {});
          d.request.phase = score_phases(*skill, s.observe(i), &ctx).chosen;
        } catch (const EvalError& e) {
          d.request.phase = current_phase(s.signal(i));
          d.fault = e.what();
        }
        return d;
      };
    }
  }
  throw ConfigError("unknown controller kind");
}

sim::EpisodeResult drive(const ControllerSpec& spec, const sim::ScenarioConfig& scenario, std::uint64_t seed,
                         sim::EpisodeOptions options) {
  return sim::run_episode(scenario, make_controller(spec), seed, options);
}

}  // namespace tsevo::control
