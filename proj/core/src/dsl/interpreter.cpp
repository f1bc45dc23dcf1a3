#include "tsevo/dsl/interpreter.hpp"

#include <cmath>
#include <string>

#include "tsevo/dsl/whitelist.hpp"
#include "tsevo/error.hpp"

namespace tsevo::dsl {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw EvalError(std::string(what) + " produced a non-finite result");
  return v;
}

double py_mod(double a, double b) {
  if (b == 0.0) throw EvalError("modulo by zero");
  double mod = std::fmod(a, b);
  if (mod != 0.0) {
    if ((b < 0) != (mod < 0)) mod += b;
  } else {
    mod = std::copysign(0.0, b);
  }
  return mod;
}

double py_floordiv(double a, double b) {
  if (b == 0.0) throw EvalError("floor division by zero");
  double mod = std::fmod(a, b);
  double div = (a - mod) / b;
  if (mod != 0.0 && ((b < 0) != (mod < 0))) div -= 1.0;
  double floordiv;
  if (div != 0.0) {
    floordiv = std::floor(div);
    if (div - floordiv > 0.5) floordiv += 1.0;
  } else {
    floordiv = std::copysign(0.0, a / b);
  }
  return floordiv;
}

double py_pow(double a, double b) {
  if (a == 0.0 && b < 0.0) throw EvalError("zero raised to a negative power");
  if (a < 0.0 && b != std::floor(b)) throw EvalError("negative number raised to a fractional power");
  return std::pow(a, b);
}

double apply(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::add: return checked(a + b, "addition");
    case BinaryOp::sub: return checked(a - b, "subtraction");
    case BinaryOp::mul: return checked(a * b, "multiplication");
    case BinaryOp::div:
      if (b == 0.0) throw EvalError("division by zero");
      return checked(a / b, "division");
    case BinaryOp::floordiv: return checked(py_floordiv(a, b), "floor division");
    case BinaryOp::mod: return checked(py_mod(a, b), "modulo");
    case BinaryOp::pow: return checked(py_pow(a, b), "power");
  }
  throw EvalError("unknown operator");
}

bool compare(CompareOp op, double a, double b) {
  switch (op) {
    case CompareOp::lt: return a < b;
    case CompareOp::le: return a <= b;
    case CompareOp::gt: return a > b;
    case CompareOp::ge: return a >= b;
    case CompareOp::eq: return a == b;
    case CompareOp::ne: return a != b;
  }
  return false;
}

long long integral(double v) {
  if (!std::isfinite(v) || v != std::floor(v) || std::fabs(v) > 1e15) {
    throw EvalError("range() arguments must be integers");
  }
  return static_cast<long long>(v);
}

// Closed-form length and sum of range(args...).
std::pair<double, double> range_stats(const Call& call, const EvalContext& ctx) {
  if (call.func != "range") throw EvalError(call.func + "() cannot take this argument");
  if (call.args.empty() || call.args.size() > 3) throw EvalError("range() takes 1 to 3 arguments");
  long long start = 0, stop = 0, step = 1;
  if (call.args.size() == 1) {
    stop = integral(evaluate_expr(*call.args[0], ctx));
  } else {
    start = integral(evaluate_expr(*call.args[0], ctx));
    stop = integral(evaluate_expr(*call.args[1], ctx));
    if (call.args.size() == 3) step = integral(evaluate_expr(*call.args[2], ctx));
  }
  if (step == 0) throw EvalError("range() step must not be zero");
  long long n = 0;
  if (step > 0 && stop > start) n = (stop - start + step - 1) / step;
  if (step < 0 && stop < start) n = (start - stop - step - 1) / -step;
  const double len = static_cast<double>(n);
  const double sum = len * static_cast<double>(start) + static_cast<double>(step) * len * (len - 1.0) / 2.0;
  return {len, checked(sum, "sum")};
}

double call_builtin(const Call& call, const EvalContext& ctx) {
  const auto& f = call.func;
  if (f == "min" || f == "max") {
    if (call.args.size() < 2) throw EvalError(f + "() needs at least two arguments");
    double best = evaluate_expr(*call.args[0], ctx);
    for (std::size_t i = 1; i < call.args.size(); ++i) {
      double v = evaluate_expr(*call.args[i], ctx);
      if (f == "min" ? v < best : v > best) best = v;
    }
    return best;
  }
  if (f == "abs") {
    if (call.args.size() != 1) throw EvalError("abs() takes exactly one argument");
    return std::fabs(evaluate_expr(*call.args[0], ctx));
  }
  if (f == "sum" || f == "len") {
    if (call.args.size() != 1) throw EvalError(f + "() takes exactly one argument");
    const auto* inner = std::get_if<Call>(&call.args[0]->node);
    if (!inner) throw EvalError(f + "() argument must be a range()");
    auto [len, sum] = range_stats(*inner, ctx);
    return f == "len" ? len : sum;
  }
  if (f == "range") throw EvalError("range() may only be used inside sum() or len()");
  throw EvalError("unknown function '" + f + "'");
}

struct ExprEval {
  const EvalContext& ctx;

  double operator()(const Number& n) const { return n.value; }
  double operator()(const Name& n) const {
    if (!n.var) throw EvalError("unknown name '" + n.id + "'");
    return ctx.get(*n.var);
  }
  double operator()(const Unary& u) const {
    const double v = evaluate_expr(*u.operand, ctx);
    switch (u.op) {
      case UnaryOp::neg: return -v;
      case UnaryOp::pos: return v;
      case UnaryOp::logical_not: return v == 0.0 ? 1.0 : 0.0;
    }
    return v;
  }
  double operator()(const Binary& b) const {
    const double lhs = evaluate_expr(*b.lhs, ctx);
    return apply(b.op, lhs, evaluate_expr(*b.rhs, ctx));
  }
  double operator()(const Compare& c) const {
    double lhs = evaluate_expr(*c.first, ctx);
    for (const auto& [op, expr] : c.rest) {
      const double rhs = evaluate_expr(*expr, ctx);
      if (!compare(op, lhs, rhs)) return 0.0;
      lhs = rhs;
    }
    return 1.0;
  }
  double operator()(const Logical& l) const {
    double v = 0.0;
    for (const auto& operand : l.operands) {
      v = evaluate_expr(*operand, ctx);
      const bool truthy = v != 0.0;
      if (l.op == LogicalOp::logical_and ? !truthy : truthy) return v;
    }
    return v;
  }
  double operator()(const Call& c) const { return call_builtin(c, ctx); }
};

void run_block(const Block& block, EvalContext& ctx) {
  for (const auto& stmt : block) {
    if (const auto* aug = std::get_if<AugAssign>(&stmt.node)) {
      const double rhs = evaluate_expr(*aug->value, ctx);
      switch (aug->op) {
        case AugOp::add: ctx.value = apply(BinaryOp::add, ctx.value, rhs); break;
        case AugOp::sub: ctx.value = apply(BinaryOp::sub, ctx.value, rhs); break;
        case AugOp::mul: ctx.value = apply(BinaryOp::mul, ctx.value, rhs); break;
        case AugOp::div: ctx.value = apply(BinaryOp::div, ctx.value, rhs); break;
      }
      continue;
    }
    const auto& chain = std::get<IfChain>(stmt.node);
    bool taken = false;
    for (const auto& branch : chain.branches) {
      if (evaluate_expr(*branch.condition, ctx) != 0.0) {
        run_block(branch.body, ctx);
        taken = true;
        break;
      }
    }
    if (!taken && chain.orelse) run_block(*chain.orelse, ctx);
  }
}

}  // namespace

void EvalContext::bind(std::string_view name, double value) {
  auto var = resolve_variable(name);
  if (!var) throw EvalError("unknown variable '" + std::string(name) + "'");
  bind(*var, value);
}

double EvalContext::get(VarId var) const {
  if (!is_bound(var)) throw EvalError("variable '" + std::string(variable_name(var)) + "' is not bound");
  return values_[static_cast<std::size_t>(var)];
}

double evaluate_expr(const Expr& expr, const EvalContext& ctx) { return std::visit(ExprEval{ctx}, expr.node); }

double evaluate(const SkillAst& ast, EvalContext& ctx) {
  run_block(ast.statements, ctx);
  return ctx.value;
}

}  // namespace tsevo::dsl
