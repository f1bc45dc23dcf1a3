#include "tsevo/dsl/printer.hpp"

#include <charconv>
#include <cmath>

#include "tsevo/error.hpp"

namespace tsevo::dsl {

namespace {

// Binding strength, loosest first.
enum Prec : int { p_or = 1, p_and, p_not, p_compare, p_arith, p_term, p_unary, p_power, p_atom };

std::string number_text(double v) {
  if (!std::isfinite(v)) throw Error("cannot print a non-finite literal");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const char* binary_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return " + ";
    case BinaryOp::sub: return " - ";
    case BinaryOp::mul: return " * ";
    case BinaryOp::div: return " / ";
    case BinaryOp::floordiv: return " // ";
    case BinaryOp::mod: return " % ";
    case BinaryOp::pow: return " ** ";
  }
  return "";
}

const char* compare_text(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return " < ";
    case CompareOp::le: return " <= ";
    case CompareOp::gt: return " > ";
    case CompareOp::ge: return " >= ";
    case CompareOp::eq: return " == ";
    case CompareOp::ne: return " != ";
  }
  return "";
}

int binary_prec(BinaryOp op) {
  switch (op) {
    case BinaryOp::add:
    case BinaryOp::sub: return p_arith;
    case BinaryOp::pow: return p_power;
    default: return p_term;
  }
}

int precedence(const Expr& e) {
  struct V {
    int operator()(const Number& n) const { return std::signbit(n.value) ? p_unary : p_atom; }
    int operator()(const Name&) const { return p_atom; }
    int operator()(const Call&) const { return p_atom; }
    int operator()(const Unary& u) const { return u.op == UnaryOp::logical_not ? p_not : p_unary; }
    int operator()(const Binary& b) const { return binary_prec(b.op); }
    int operator()(const Compare&) const { return p_compare; }
    int operator()(const Logical& l) const { return l.op == LogicalOp::logical_or ? p_or : p_and; }
  };
  return std::visit(V{}, e.node);
}

void emit(const Expr& e, int required, std::string& out);

void emit_node(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          if (std::signbit(n.value)) {
            out += '-';
            out += number_text(-n.value);
          } else {
            out += number_text(n.value);
          }
        } else if constexpr (std::is_same_v<T, Name>) {
          out += n.id;
        } else if constexpr (std::is_same_v<T, Call>) {
          out += n.func;
          out += '(';
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out += ", ";
            emit(*n.args[i], 0, out);
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, Unary>) {
          if (n.op == UnaryOp::logical_not) {
            out += "not ";
            emit(*n.operand, p_not, out);
          } else {
            out += n.op == UnaryOp::neg ? '-' : '+';
            emit(*n.operand, p_unary, out);
          }
        } else if constexpr (std::is_same_v<T, Binary>) {
          const int p = binary_prec(n.op);
          if (n.op == BinaryOp::pow) {
            emit(*n.lhs, p_atom, out);
            out += binary_text(n.op);
            emit(*n.rhs, p_unary, out);
          } else {
            emit(*n.lhs, p, out);
            out += binary_text(n.op);
            emit(*n.rhs, p + 1, out);
          }
        } else if constexpr (std::is_same_v<T, Compare>) {
          emit(*n.first, p_arith, out);
          for (const auto& [op, rhs] : n.rest) {
            out += compare_text(op);
            emit(*rhs, p_arith, out);
          }
        } else if constexpr (std::is_same_v<T, Logical>) {
          const int p = n.op == LogicalOp::logical_or ? p_or : p_and;
          for (std::size_t i = 0; i < n.operands.size(); ++i) {
            if (i) out += n.op == LogicalOp::logical_or ? " or " : " and ";
            emit(*n.operands[i], p + 1, out);
          }
        }
      },
      e.node);
}

void emit(const Expr& e, int required, std::string& out) {
  if (precedence(e) < required) {
    out += '(';
    emit_node(e, out);
    out += ')';
  } else {
    emit_node(e, out);
  }
}

const char* aug_text(AugOp op) {
  switch (op) {
    case AugOp::add: return " += ";
    case AugOp::sub: return " -= ";
    case AugOp::mul: return " *= ";
    case AugOp::div: return " /= ";
  }
  return "";
}

void emit_block(const Block& block, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 4, ' ');
  for (const auto& stmt : block) {
    if (const auto* aug = std::get_if<AugAssign>(&stmt.node)) {
      out += pad + "value[0]" + aug_text(aug->op) + to_source(*aug->value) + '\n';
      continue;
    }
    const auto& chain = std::get<IfChain>(stmt.node);
    for (std::size_t i = 0; i < chain.branches.size(); ++i) {
      out += pad + (i == 0 ? "if " : "elif ") + to_source(*chain.branches[i].condition) + ":\n";
      emit_block(chain.branches[i].body, indent + 1, out);
    }
    if (chain.orelse) {
      out += pad + "else:\n";
      emit_block(*chain.orelse, indent + 1, out);
    }
  }
}

}  // namespace

std::string to_source(const Expr& expr) {
  std::string out;
  emit(expr, 0, out);
  return out;
}

std::string to_source(const SkillAst& ast) {
  std::string out;
  emit_block(ast.statements, 0, out);
  if (!out.empty()) out.pop_back();
  return out;
}

}  // namespace tsevo::dsl
