#include "tsevo/events/events.hpp"

#include <algorithm>
#include <set>

#include "tsevo/error.hpp"
#include "tsevo/util/percentile.hpp"

namespace tsevo::events {

using dsl::VarId;

int priority(EventKind kind) { return static_cast<int>(kind); }

std::string_view kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::emergency: return "emergency";
    case EventKind::incident: return "incident";
    case EventKind::transit: return "transit";
    case EventKind::congestion: return "congestion";
  }
  return "?";
}

std::string_view kind_name(SkillKind kind) {
  switch (kind) {
    case SkillKind::normal: return "normal";
    case SkillKind::emergency: return "emergency";
    case SkillKind::incident: return "incident";
    case SkillKind::transit: return "transit";
    case SkillKind::congestion: return "congestion";
  }
  return "?";
}

SkillKind skill_for(EventKind kind) {
  switch (kind) {
    case EventKind::emergency: return SkillKind::emergency;
    case EventKind::incident: return SkillKind::incident;
    case EventKind::transit: return SkillKind::transit;
    case EventKind::congestion: return SkillKind::congestion;
  }
  return SkillKind::normal;
}

std::optional<SkillKind> parse_skill_kind(std::string_view name) {
  for (auto k : kSkillKinds) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

sim::EventNote TrafficEvent::note() const { return sim::EventNote{std::string(kind_name(kind)), context}; }

std::optional<int> congestion_level(double current, const QueueHistory& history, const DetectorConfig& config) {
  if (history.size() < config.congestion_window) return std::nullopt;
  std::vector<double> window(history.end() - static_cast<std::ptrdiff_t>(config.congestion_window), history.end());
  const double p90 = percentile(window, config.congestion_percentile);
  if (!(current > p90)) return std::nullopt;
  const double top = *std::max_element(window.begin(), window.end());
  int level = 0;
  for (double q : {0.25, 0.5, 0.75}) {
    if (current > p90 + (top - p90) * q) ++level;
  }
  return std::min(level, 3);
}

std::vector<TrafficEvent> detect(const sim::Simulation& sim, int intersection, const QueueHistory& history,
                                 const DetectorConfig& config) {
  std::vector<TrafficEvent> out;
  const auto& net = sim.network();
  const auto& node = net.intersections[static_cast<std::size_t>(intersection)];

  std::optional<double> ev_distance;
  int ev_phase = 0;
  int buses = 0;
  double bus_delay = 0.0;
  std::set<std::pair<int, int>> blocked;
  for (std::size_t h = 0; h < 4; ++h) {
    const int link = node.in_links[h];
    const double length = net.links[static_cast<std::size_t>(link)].length;
    for (int lane = 0; lane < sim::kLanesPerLink; ++lane) {
      const int phase = sim::phase_of(static_cast<sim::Heading>(h), lane);
      for (int id : sim.lane_vehicles(link, lane)) {
        const auto& v = sim.vehicle(id);
        const double to_stop = length - sim.vehicle_position(v);
        if (v.vclass == sim::VehicleClass::emergency && to_stop <= config.emergency_radius) {
          const double d = std::max(1.0, to_stop);
          if (!ev_distance || d < *ev_distance) {
            ev_distance = d;
            ev_phase = phase;
          }
        }
        if (v.vclass == sim::VehicleClass::bus) {
          ++buses;
          bus_delay += v.cumulative_wait;
        }
        if (v.stopped_for > config.incident_stop_threshold) {
          // A stop line that turned green only after the vehicle stopped still counts as a signal wait.
          const bool red_since_stop =
              !sim.is_green(intersection, phase) || sim.signal(intersection).green_elapsed < v.stopped_for;
          const bool signal_wait = to_stop <= config.signal_stop_radius && red_since_stop;
          if (!signal_wait) blocked.insert({link, lane});
        }
      }
    }
  }
  if (ev_distance) {
    out.push_back({EventKind::emergency, intersection,
                   {{VarId::emergency_distance, *ev_distance}, {VarId::emergency_phase, ev_phase}}});
  }
  if (!blocked.empty()) {
    out.push_back({EventKind::incident, intersection, {{VarId::incident_blocked, static_cast<double>(blocked.size())}}});
  }
  if (buses > 0) {
    out.push_back(
        {EventKind::transit, intersection, {{VarId::bus_count, static_cast<double>(buses)}, {VarId::bus_delay, bus_delay}}});
  }
  if (auto level = congestion_level(sim.intersection_queue(intersection), history, config)) {
    out.push_back({EventKind::congestion, intersection, {{VarId::congestion_level, static_cast<double>(*level)}}});
  }
  return out;
}

std::vector<TrafficEvent> Detector::observe(const sim::Simulation& sim, int intersection) {
  if (history_.empty()) history_.resize(sim.network().intersections.size());
  auto& history = history_[static_cast<std::size_t>(intersection)];
  auto events = detect(sim, intersection, history, config_);
  history.push_back(sim.intersection_queue(intersection));
  if (history.size() > config_.congestion_window) history.pop_front();
  return events;
}

void SkillBank::set(SkillKind kind, const Skill& skill) {
  skills_.insert_or_assign(kind, dsl::compile_skill(skill, dsl::VariableWhitelist::with_events()));
}

const dsl::CompiledSkill& SkillBank::get(SkillKind kind) const {
  const auto it = skills_.find(kind);
  if (it == skills_.end()) throw ConfigError("skill bank has no '" + std::string(kind_name(kind)) + "' skill");
  return it->second;
}

bool SkillBank::complete() const { return skills_.size() == kSkillKinds.size(); }

Skill default_skill(SkillKind kind) {
  Skill s;
  s.id = std::string("bank-") + std::string(kind_name(kind));
  switch (kind) {
    case SkillKind::normal:
      s.description = "Saturation-aware branching with distance-adjusted urgency for heavy queues.";
      s.inlane_code =
          "if waiting > 5:\n"
          "    value[0] += waiting * (max(1, dist) - dist % 3) + vehicles // 4\n"
          "elif waiting > 0:\n"
          "    value[0] += waiting * 2";
      s.outlane_code = "value[0] += min(10, vehicles) * max(0, dist - 3)";
      break;
    case SkillKind::emergency:
      s.description = "Distance-aware preemption for the phase serving the ambulance.";
      s.inlane_code =
          "if emergency_distance > 0:\n"
          "    if emergency_phase == index:\n"
          "        value[0] += max(0, 200 - emergency_distance) * 10\n"
          "    else:\n"
          "        value[0] += waiting * 2\n"
          "else:\n"
          "    value[0] += waiting * 3";
      s.outlane_code = "value[0] -= num_vehicle * 0.3";
      break;
    case SkillKind::transit:
      s.description = "Bus-priority scoring with amplified waiting weight and density compensation.";
      s.inlane_code = "value[0] += waiting * 4 + vehicles / max(1, dist)";
      s.outlane_code = "value[0] -= (vehicles / max(1, dist)) * 2";
      break;
    case SkillKind::incident:
      s.description = "Prioritize moving vehicles over queued ones while lanes are blocked.";
      s.inlane_code =
          "if incident_blocked > 0:\n"
          "    value[0] += max(0, vehicles - waiting) * 5\n"
          "else:\n"
          "    value[0] += waiting * 3";
      s.outlane_code = "value[0] -= vehicles * 0.5";
      break;
    case SkillKind::congestion:
      s.description = "Nonlinear saturation response with a severity-scaled bonus.";
      s.inlane_code =
          "value[0] += waiting ** 2\n"
          "if congestion_level > 1:\n"
          "    value[0] += waiting * congestion_level * 2";
      s.outlane_code = "value[0] += dist * 0.5";
      break;
  }
  return s;
}

SkillBank default_bank() {
  SkillBank bank;
  for (auto kind : kSkillKinds) bank.set(kind, default_skill(kind));
  return bank;
}

const TrafficEvent* top_event(const std::vector<TrafficEvent>& events) {
  const TrafficEvent* best = nullptr;
  for (const auto& e : events) {
    if (!best || priority(e.kind) < priority(best->kind)) best = &e;
  }
  return best;
}

SkillKind dispatch_kind(const std::vector<TrafficEvent>& events) {
  const auto* top = top_event(events);
  return top ? skill_for(top->kind) : SkillKind::normal;
}

std::pair<SkillKind, const dsl::CompiledSkill*> dispatch(const std::vector<TrafficEvent>& events,
                                                         const SkillBank& bank) {
  const SkillKind kind = dispatch_kind(events);
  return {kind, &bank.get(kind)};
}

dsl::EvalContext inject_context(const TrafficEvent* event, dsl::EvalContext base) {
  for (auto var : {VarId::emergency_distance, VarId::emergency_phase, VarId::bus_count, VarId::bus_delay,
                   VarId::incident_blocked, VarId::congestion_level}) {
    base.bind(var, 0.0);
  }
  if (event) {
    for (const auto& [var, value] : event->context) base.bind(var, value);
  }
  return base;
}

}  // namespace tsevo::events
