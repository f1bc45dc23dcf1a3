#include "tsevo/dsl/whitelist.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace tsevo::dsl {

namespace {

constexpr std::array<std::string_view, kVarCount> kNames = {
    "num_vehicle",        "num_waiting_vehicle", "vehicle_dist",     "index",
    "emergency_distance", "emergency_phase",     "bus_count",        "bus_delay",
    "incident_blocked",   "congestion_level",
};

std::optional<VarId> abstract_lookup(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<VarId>(i);
  }
  return std::nullopt;
}

// Strips "<prefix><digits>_" and returns the remainder, or empty on mismatch.
std::optional<std::string_view> strip_lane_prefix(std::string_view name, std::string_view prefix) {
  if (!name.starts_with(prefix)) return std::nullopt;
  name.remove_prefix(prefix.size());
  std::size_t digits = 0;
  while (digits < name.size() && std::isdigit(static_cast<unsigned char>(name[digits]))) ++digits;
  if (digits == 0 || digits >= name.size() || name[digits] != '_') return std::nullopt;
  return name.substr(digits + 1);
}

}  // namespace

std::string_view variable_name(VarId var) { return kNames[static_cast<std::size_t>(var)]; }

std::optional<VarId> resolve_variable(std::string_view name) {
  if (auto var = abstract_lookup(name)) return var;
  if (name == "waiting") return VarId::num_waiting_vehicle;
  if (name == "dist") return VarId::vehicle_dist;
  if (name == "vehicles") return VarId::num_vehicle;
  if (auto rest = strip_lane_prefix(name, "inlane_")) {
    if (*rest == "num_vehicle") return VarId::num_vehicle;
    if (*rest == "num_waiting_vehicle") return VarId::num_waiting_vehicle;
    if (*rest == "vehicle_dist") return VarId::vehicle_dist;
    return std::nullopt;
  }
  if (auto rest = strip_lane_prefix(name, "outlane_")) {
    if (*rest == "num_vehicle") return VarId::num_vehicle;
    if (*rest == "vehicle_dist") return VarId::vehicle_dist;
  }
  return std::nullopt;
}

bool is_event_variable(VarId var) { return static_cast<std::size_t>(var) >= static_cast<std::size_t>(VarId::emergency_distance); }

VariableWhitelist VariableWhitelist::lane() {
  VariableWhitelist w;
  for (auto v : {VarId::num_vehicle, VarId::num_waiting_vehicle, VarId::vehicle_dist, VarId::index}) {
    w.allowed_.set(static_cast<std::size_t>(v));
  }
  return w;
}

VariableWhitelist VariableWhitelist::with_events() {
  VariableWhitelist w;
  w.allowed_.set();
  return w;
}

bool VariableWhitelist::allows_builtin(std::string_view func) const {
  return std::find(std::begin(kBuiltins), std::end(kBuiltins), func) != std::end(kBuiltins);
}

bool VariableWhitelist::has_event_variables() const {
  return allows(VarId::emergency_distance);
}

std::vector<VarId> VariableWhitelist::lane_variables() const {
  std::vector<VarId> out;
  for (std::size_t i = 0; i < kVarCount; ++i) {
    auto v = static_cast<VarId>(i);
    if (!is_event_variable(v) && allows(v)) out.push_back(v);
  }
  return out;
}

std::vector<VarId> VariableWhitelist::event_variables() const {
  std::vector<VarId> out;
  for (std::size_t i = 0; i < kVarCount; ++i) {
    auto v = static_cast<VarId>(i);
    if (is_event_variable(v) && allows(v)) out.push_back(v);
  }
  return out;
}

}  // namespace tsevo::dsl
