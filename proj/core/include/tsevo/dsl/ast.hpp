#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tsevo::dsl {

// Runtime variables a skill may read. Every accepted spelling (abstract
// name or lane-indexed alias) resolves to exactly one of these.
enum class VarId : std::uint8_t {
  num_vehicle,
  num_waiting_vehicle,
  vehicle_dist,
  index,
  emergency_distance,
  emergency_phase,
  bus_count,
  bus_delay,
  incident_blocked,
  congestion_level,
};
inline constexpr std::size_t kVarCount = 10;

struct SourcePos {
  int line = 1;
  int column = 1;
};

enum class BinaryOp { add, sub, mul, div, floordiv, mod, pow };
enum class UnaryOp { neg, pos, logical_not };
enum class CompareOp { lt, le, gt, ge, eq, ne };
enum class LogicalOp { logical_and, logical_or };
enum class AugOp { add, sub, mul, div };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Number {
  double value = 0.0;
};

struct Name {
  std::string id;             // spelling as written
  std::optional<VarId> var;   // resolved variable, empty for unknown names
};

struct Unary {
  UnaryOp op;
  ExprPtr operand;
};

struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};

// Possibly chained comparison: first op0 e0 op1 e1 ...
struct Compare {
  ExprPtr first;
  std::vector<std::pair<CompareOp, ExprPtr>> rest;
};

struct Logical {
  LogicalOp op;
  std::vector<ExprPtr> operands;
};

struct Call {
  std::string func;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<Number, Name, Unary, Binary, Compare, Logical, Call> node;
  SourcePos pos;
};

struct Stmt;
using Block = std::vector<Stmt>;

// value[0] <op>= value
struct AugAssign {
  AugOp op;
  ExprPtr value;
};

struct Branch {
  ExprPtr condition;
  Block body;
};

// if / elif ... / else chain.
struct IfChain {
  std::vector<Branch> branches;
  std::optional<Block> orelse;
};

struct Stmt {
  std::variant<AugAssign, IfChain> node;
  SourcePos pos;
};

struct SkillAst {
  Block statements;
};

// Construction helpers used by the parser and the scripted mutator.
ExprPtr make_number(double value, SourcePos pos = {});
ExprPtr make_name(std::string id, SourcePos pos = {});
ExprPtr make_unary(UnaryOp op, ExprPtr operand, SourcePos pos = {});
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, SourcePos pos = {});
ExprPtr make_compare(ExprPtr first, std::vector<std::pair<CompareOp, ExprPtr>> rest, SourcePos pos = {});
ExprPtr make_logical(LogicalOp op, std::vector<ExprPtr> operands, SourcePos pos = {});
ExprPtr make_call(std::string func, std::vector<ExprPtr> args, SourcePos pos = {});

}  // namespace tsevo::dsl
