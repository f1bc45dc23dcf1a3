#include "tsevo/dsl/ast.hpp"

#include "tsevo/dsl/whitelist.hpp"

namespace tsevo::dsl {

namespace {

ExprPtr wrap(decltype(Expr::node) node, SourcePos pos) {
  return std::make_shared<const Expr>(Expr{std::move(node), pos});
}

}  // namespace

ExprPtr make_number(double value, SourcePos pos) { return wrap(Number{value}, pos); }

ExprPtr make_name(std::string id, SourcePos pos) {
  auto var = resolve_variable(id);
  return wrap(Name{std::move(id), var}, pos);
}

ExprPtr make_unary(UnaryOp op, ExprPtr operand, SourcePos pos) {
  return wrap(Unary{op, std::move(operand)}, pos);
}

ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, SourcePos pos) {
  return wrap(Binary{op, std::move(lhs), std::move(rhs)}, pos);
}

ExprPtr make_compare(ExprPtr first, std::vector<std::pair<CompareOp, ExprPtr>> rest, SourcePos pos) {
  return wrap(Compare{std::move(first), std::move(rest)}, pos);
}

ExprPtr make_logical(LogicalOp op, std::vector<ExprPtr> operands, SourcePos pos) {
  return wrap(Logical{op, std::move(operands)}, pos);
}

ExprPtr make_call(std::string func, std::vector<ExprPtr> args, SourcePos pos) {
  return wrap(Call{std::move(func), std::move(args)}, pos);
}

}  // namespace tsevo::dsl
