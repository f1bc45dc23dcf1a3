#pragma once

#include <string>
#include <string_view>

#include "tsevo/dsl/ast.hpp"
#include "tsevo/dsl/whitelist.hpp"
#include "tsevo/error.hpp"
#include "tsevo/skill.hpp"

namespace tsevo::dsl {

enum class Stage { parse, whitelist, sandbox };

std::string_view stage_name(Stage stage);

struct ValidationReport {
  bool ok = false;
  Stage stage = Stage::parse;
  std::string message;
};

// Whitelist stage: every name resolves to an allowed variable, every call
// names an allowed builtin with a valid argument shape, and `range` appears
// only as the argument of sum/len.
ValidationReport validate(const SkillAst& ast, const VariableWhitelist& whitelist);

// Full pipeline on both code bodies: parse, whitelist, then a run with every
// variable bound to 1.0 that must produce a finite number. The outlane body
// is checked against whitelist.for_outlane().
ValidationReport sandbox_check(const Skill& skill, const VariableWhitelist& whitelist);

struct Complexity {
  int node_count = 0;
  int branch_depth = 0;
  friend bool operator==(const Complexity&, const Complexity&) = default;
};

// Counts statements, expression nodes and variable references; numeric
// literals are not counted, and an if/elif clause absorbs a comparison that
// forms its whole test. branch_depth is the deepest nesting of if-chains.
Complexity complexity(const SkillAst& ast);

// Complexity of a skill's inlane body, the body skill listings usually show.
Complexity complexity(const Skill& skill);

class InvalidSkill : public Error {
 public:
  explicit InvalidSkill(ValidationReport report)
      : Error(std::string(stage_name(report.stage)) + ": " + report.message), report_(std::move(report)) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

// A skill whose two bodies passed the full pipeline, kept with their ASTs.
struct CompiledSkill {
  Skill skill;
  SkillAst inlane;
  SkillAst outlane;
};

// Throws InvalidSkill carrying the failing report.
CompiledSkill compile_skill(Skill skill, const VariableWhitelist& whitelist);

}  // namespace tsevo::dsl
