#pragma once

#include <bitset>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsevo/dsl/ast.hpp"

namespace tsevo::dsl {

// Canonical (abstract) spelling of a variable.
std::string_view variable_name(VarId var);

// Resolves an abstract name or one of its aliases:
//   inlane_<n>_{num_vehicle,num_waiting_vehicle,vehicle_dist}
//   outlane_<n>_{num_vehicle,vehicle_dist}
//   waiting / dist / vehicles (shorthand used in the reference skill listings)
std::optional<VarId> resolve_variable(std::string_view name);

inline constexpr std::string_view kBuiltins[] = {"min", "max", "abs", "sum", "len", "range"};

class VariableWhitelist {
 public:
  // Traffic features, `index` and the accumulator.
  static VariableWhitelist lane();
  // lane() plus the six event-context variables.
  static VariableWhitelist with_events();

  // The same set without num_waiting_vehicle: outlane bodies observe the
  // downstream link, which reports no halting count.
  VariableWhitelist for_outlane() const {
    VariableWhitelist w = *this;
    w.allowed_.reset(static_cast<std::size_t>(VarId::num_waiting_vehicle));
    return w;
  }

  bool allows(VarId var) const { return allowed_.test(static_cast<std::size_t>(var)); }
  bool allows_builtin(std::string_view func) const;
  bool has_event_variables() const;

  std::vector<VarId> lane_variables() const;
  std::vector<VarId> event_variables() const;

 private:
  std::bitset<kVarCount> allowed_;
};

bool is_event_variable(VarId var);

}  // namespace tsevo::dsl
