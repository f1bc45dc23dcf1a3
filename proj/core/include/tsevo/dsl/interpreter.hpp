#pragma once

#include <array>
#include <bitset>
#include <string_view>

#include "tsevo/dsl/ast.hpp"

namespace tsevo::dsl {

// Variable bindings plus the one-slot accumulator `value[0]`.
class EvalContext {
 public:
  EvalContext() = default;

  void bind(VarId var, double value) {
    values_[static_cast<std::size_t>(var)] = value;
    bound_.set(static_cast<std::size_t>(var));
  }
  // Binds by abstract name or alias; throws EvalError for unknown names.
  void bind(std::string_view name, double value);

  bool is_bound(VarId var) const { return bound_.test(static_cast<std::size_t>(var)); }
  double get(VarId var) const;

  double value = 0.0;

 private:
  std::array<double, kVarCount> values_{};
  std::bitset<kVarCount> bound_;
};

// Executes the statements top to bottom and returns the final accumulator.
// Arithmetic follows Python float semantics (`//` floors, `%` takes the sign
// of the divisor). Throws EvalError on a zero divisor, a non-finite
// intermediate result, an unbound variable or a misused builtin.
double evaluate(const SkillAst& ast, EvalContext& ctx);

double evaluate_expr(const Expr& expr, const EvalContext& ctx);

}  // namespace tsevo::dsl
