#include "tsevo/dsl/validate.hpp"

#include <algorithm>
#include <cmath>

#include "tsevo/dsl/interpreter.hpp"
#include "tsevo/dsl/parser.hpp"

namespace tsevo::dsl {

namespace {

struct Rejected {
  std::string message;
};

void check_expr(const Expr& e, const VariableWhitelist& w, bool range_ok);

void check_call(const Call& c, const VariableWhitelist& w, bool range_ok) {
  if (!w.allows_builtin(c.func)) throw Rejected{"function '" + c.func + "' is not allowed"};
  const auto n = c.args.size();
  if ((c.func == "min" || c.func == "max") && n < 2) throw Rejected{c.func + "() needs at least two arguments"};
  if (c.func == "abs" && n != 1) throw Rejected{"abs() takes exactly one argument"};
  if (c.func == "range") {
    if (!range_ok) throw Rejected{"range() may only be used inside sum() or len()"};
    if (n < 1 || n > 3) throw Rejected{"range() takes 1 to 3 arguments"};
  }
  if (c.func == "sum" || c.func == "len") {
    const Call* inner = n == 1 ? std::get_if<Call>(&c.args[0]->node) : nullptr;
    if (!inner || inner->func != "range") throw Rejected{c.func + "() takes a single range() argument"};
    check_call(*inner, w, true);
    return;
  }
  for (const auto& arg : c.args) check_expr(*arg, w, false);
}

void check_expr(const Expr& e, const VariableWhitelist& w, bool range_ok) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Name>) {
          if (!n.var) throw Rejected{"unknown name '" + n.id + "'"};
          if (!w.allows(*n.var)) throw Rejected{"variable '" + n.id + "' is not allowed here"};
        } else if constexpr (std::is_same_v<T, Unary>) {
          check_expr(*n.operand, w, false);
        } else if constexpr (std::is_same_v<T, Binary>) {
          check_expr(*n.lhs, w, false);
          check_expr(*n.rhs, w, false);
        } else if constexpr (std::is_same_v<T, Compare>) {
          check_expr(*n.first, w, false);
          for (const auto& [op, rhs] : n.rest) check_expr(*rhs, w, false);
        } else if constexpr (std::is_same_v<T, Logical>) {
          for (const auto& operand : n.operands) check_expr(*operand, w, false);
        } else if constexpr (std::is_same_v<T, Call>) {
          check_call(n, w, range_ok);
        }
      },
      e.node);
}

void check_block(const Block& block, const VariableWhitelist& w) {
  for (const auto& stmt : block) {
    if (const auto* aug = std::get_if<AugAssign>(&stmt.node)) {
      check_expr(*aug->value, w, false);
      continue;
    }
    const auto& chain = std::get<IfChain>(stmt.node);
    for (const auto& branch : chain.branches) {
      check_expr(*branch.condition, w, false);
      check_block(branch.body, w);
    }
    if (chain.orelse) check_block(*chain.orelse, w);
  }
}

bool is_literal(const Expr& e) {
  if (std::holds_alternative<Number>(e.node)) return true;
  const auto* u = std::get_if<Unary>(&e.node);
  return u && u->op != UnaryOp::logical_not && std::holds_alternative<Number>(u->operand->node);
}

int count_expr(const Expr& e) {
  if (is_literal(e)) return 0;
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          return 0;
        } else if constexpr (std::is_same_v<T, Name>) {
          return 1;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return 1 + count_expr(*n.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return 1 + count_expr(*n.lhs) + count_expr(*n.rhs);
        } else if constexpr (std::is_same_v<T, Compare>) {
          int total = 1 + count_expr(*n.first);
          for (const auto& [op, rhs] : n.rest) total += count_expr(*rhs);
          return total;
        } else if constexpr (std::is_same_v<T, Logical>) {
          int total = 1;
          for (const auto& operand : n.operands) total += count_expr(*operand);
          return total;
        } else {
          int total = 1;
          for (const auto& arg : n.args) total += count_expr(*arg);
          return total;
        }
      },
      e.node);
}

Complexity count_block(const Block& block) {
  Complexity c;
  for (const auto& stmt : block) {
    if (const auto* aug = std::get_if<AugAssign>(&stmt.node)) {
      c.node_count += 2 + count_expr(*aug->value);
      continue;
    }
    const auto& chain = std::get<IfChain>(stmt.node);
    int inner_depth = 0;
    for (const auto& branch : chain.branches) {
      const Expr& test = *branch.condition;
      int test_nodes = count_expr(test);
      if (std::holds_alternative<Compare>(test.node)) test_nodes -= 1;
      const Complexity body = count_block(branch.body);
      c.node_count += 1 + test_nodes + body.node_count;
      inner_depth = std::max(inner_depth, body.branch_depth);
    }
    if (chain.orelse) {
      const Complexity body = count_block(*chain.orelse);
      c.node_count += body.node_count;
      inner_depth = std::max(inner_depth, body.branch_depth);
    }
    c.branch_depth = std::max(c.branch_depth, 1 + inner_depth);
  }
  return c;
}

ValidationReport ok_report() { return ValidationReport{true, Stage::sandbox, ""}; }

ValidationReport check_body(std::string_view label, const std::string& code, const VariableWhitelist& w,
                            SkillAst* out) {
  SkillAst ast;
  try {
    ast = parse(code);
  } catch (const SyntaxError& e) {
    return {false, Stage::parse, std::string(label) + ": " + e.what()};
  }
  if (auto report = validate(ast, w); !report.ok) {
    report.message = std::string(label) + ": " + report.message;
    return report;
  }
  EvalContext ctx;
  for (std::size_t i = 0; i < kVarCount; ++i) ctx.bind(static_cast<VarId>(i), 1.0);
  try {
    const double v = evaluate(ast, ctx);
    if (!std::isfinite(v)) return {false, Stage::sandbox, std::string(label) + ": result is not finite"};
  } catch (const EvalError& e) {
    return {false, Stage::sandbox, std::string(label) + ": " + e.what()};
  }
  if (out) *out = std::move(ast);
  return ok_report();
}

ValidationReport check_skill(const Skill& skill, const VariableWhitelist& w, SkillAst* inlane, SkillAst* outlane) {
  if (auto r = check_body("inlane", skill.inlane_code, w, inlane); !r.ok) return r;
  return check_body("outlane", skill.outlane_code, w.for_outlane(), outlane);
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::parse: return "parse";
    case Stage::whitelist: return "whitelist";
    case Stage::sandbox: return "sandbox";
  }
  return "unknown";
}

ValidationReport validate(const SkillAst& ast, const VariableWhitelist& whitelist) {
  try {
    check_block(ast.statements, whitelist);
  } catch (const Rejected& r) {
    return {false, Stage::whitelist, r.message};
  }
  return {true, Stage::whitelist, ""};
}

ValidationReport sandbox_check(const Skill& skill, const VariableWhitelist& whitelist) {
  return check_skill(skill, whitelist, nullptr, nullptr);
}

Complexity complexity(const SkillAst& ast) { return count_block(ast.statements); }

Complexity complexity(const Skill& skill) { return complexity(parse(skill.inlane_code)); }

CompiledSkill compile_skill(Skill skill, const VariableWhitelist& whitelist) {
  CompiledSkill compiled;
  auto report = check_skill(skill, whitelist, &compiled.inlane, &compiled.outlane);
  if (!report.ok) throw InvalidSkill(std::move(report));
  compiled.skill = std::move(skill);
  return compiled;
}

}  // namespace tsevo::dsl
