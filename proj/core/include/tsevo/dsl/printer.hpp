#pragma once

#include <string>

#include "tsevo/dsl/ast.hpp"

namespace tsevo::dsl {

// Renders an AST back to source. parse(to_source(ast)) evaluates identically
// to `ast`: parentheses are emitted wherever the tree shape needs them.
std::string to_source(const SkillAst& ast);
std::string to_source(const Expr& expr);

}  // namespace tsevo::dsl
