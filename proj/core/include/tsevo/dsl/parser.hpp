#pragma once

#include <string_view>

#include "tsevo/dsl/ast.hpp"

namespace tsevo::dsl {

// Parses skill code. Blocks are delimited by a trailing colon and deeper
// indentation; a line indented deeper than its logical line (and not opening
// a block) continues that line, as do lines inside open brackets or after a
// backslash. Throws SyntaxError for anything outside the grammar, including
// imports, definitions, lambdas, attribute access and subscripts other than
// the `value[0]` target.
SkillAst parse(std::string_view code);

}  // namespace tsevo::dsl
