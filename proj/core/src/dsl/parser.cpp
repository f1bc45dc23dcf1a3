#include "tsevo/dsl/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <string>
#include <vector>

#include "tsevo/error.hpp"

namespace tsevo::dsl {

namespace {

enum class Tok { name, number, op, newline, indent, dedent, end };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

const std::set<std::string, std::less<>> kForbiddenKeywords = {
    "import", "from",  "def",   "lambda", "class", "return", "for",    "while", "with",   "try",
    "except", "finally", "raise", "global", "nonlocal", "del", "pass", "yield", "assert", "async",
    "await",  "is",    "in",
};

[[noreturn]] void fail(const std::string& message, SourcePos pos) {
  throw SyntaxError(message, pos.line, pos.column);
}

std::string forbidden_message(const std::string& keyword) {
  if (keyword == "import" || keyword == "from") return "imports are not allowed";
  if (keyword == "def") return "function definitions are not allowed";
  if (keyword == "class") return "class definitions are not allowed";
  if (keyword == "lambda") return "lambda expressions are not allowed";
  if (keyword == "for" || keyword == "while") return "loops are not allowed";
  return "'" + keyword + "' is not allowed";
}

// Removes the common leading indentation of all non-blank lines.
std::vector<std::string> dedented_lines(std::string_view code) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= code.size()) {
    auto end = code.find('\n', start);
    if (end == std::string_view::npos) end = code.size();
    std::string line(code.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  std::size_t common = std::string::npos;
  for (const auto& line : lines) {
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    common = std::min(common, first);
  }
  if (common != std::string::npos && common > 0) {
    for (auto& line : lines) {
      if (line.size() >= common && line.find_first_not_of(" \t") >= common) line.erase(0, common);
    }
  }
  return lines;
}

class Lexer {
 public:
  std::vector<Token> run(std::string_view code) {
    const auto lines = dedented_lines(code);
    indents_ = {0};
    for (std::size_t n = 0; n < lines.size(); ++n) {
      std::string line = lines[n];
      const int lineno = static_cast<int>(n) + 1;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto last = line.find_last_not_of(" \t");
      if (last == std::string::npos) continue;  // blank
      line.erase(last + 1);
      bool backslash = false;
      if (line.back() == '\\') {
        backslash = true;
        line.pop_back();
      }
      int indent = 0;
      std::size_t col = 0;
      for (; col < line.size() && (line[col] == ' ' || line[col] == '\t'); ++col) {
        indent = line[col] == '\t' ? (indent / 8 + 1) * 8 : indent + 1;
      }

      if (pending_) {
        const bool continued = depth_ > 0 || backslash_ ||
                               (indent > logical_indent_ && !(tokens_.back().kind == Tok::op && tokens_.back().text == ":"));
        if (!continued) {
          push(Tok::newline, "", end_pos_);
          pending_ = false;
        }
      }
      if (!pending_) {
        SourcePos pos{lineno, static_cast<int>(col) + 1};
        if (indent > indents_.back()) {
          indents_.push_back(indent);
          push(Tok::indent, "", pos);
        } else {
          while (indent < indents_.back()) {
            indents_.pop_back();
            push(Tok::dedent, "", pos);
          }
          if (indent != indents_.back()) fail("unindent does not match any outer indentation level", pos);
        }
        logical_indent_ = indent;
        pending_ = true;
      }
      if (col < line.size()) scan(line, col, lineno);
      backslash_ = backslash;
      end_pos_ = SourcePos{lineno, static_cast<int>(line.size()) + 1};
    }
    if (depth_ > 0) fail("unclosed bracket", end_pos_);
    if (pending_) push(Tok::newline, "", end_pos_);
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(Tok::dedent, "", end_pos_);
    }
    push(Tok::end, "", end_pos_);
    return std::move(tokens_);
  }

 private:
  void push(Tok kind, std::string text, SourcePos pos, double number = 0.0) {
    tokens_.push_back(Token{kind, std::move(text), number, pos});
  }

  void scan(const std::string& line, std::size_t i, int lineno) {
    static constexpr std::string_view kOps3[] = {"**=", "//=", ">>=", "<<="};
    static constexpr std::string_view kOps2[] = {"**", "//", "+=", "-=", "*=", "/=", "%=", "<=", ">=",
                                                 "==", "!=", "->", ":=", "<<", ">>", "&=", "|=", "^=", "@="};
    while (i < line.size()) {
      const char c = line[i];
      const SourcePos pos{lineno, static_cast<int>(i) + 1};
      if (c == ' ' || c == '\t') {
        ++i;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && i + 1 < line.size() && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
        i = scan_number(line, i, pos);
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) ++j;
        push(Tok::name, line.substr(i, j - i), pos);
        i = j;
        continue;
      }
      if (c == '"' || c == '\'') fail("string literals are not allowed", pos);
      std::string_view rest(line.data() + i, line.size() - i);
      std::string_view op;
      for (auto candidate : kOps3) {
        if (rest.starts_with(candidate)) op = candidate;
      }
      if (op.empty()) {
        for (auto candidate : kOps2) {
          if (rest.starts_with(candidate)) op = candidate;
        }
      }
      if (op.empty()) {
        if (std::string_view("+-*/%<>=()[]{},:.;@&|^~!").find(c) == std::string_view::npos) {
          fail(std::string("unexpected character '") + c + "'", pos);
        }
        op = rest.substr(0, 1);
      }
      if (op == "(" || op == "[" || op == "{") ++depth_;
      if (op == ")" || op == "]" || op == "}") {
        if (--depth_ < 0) fail("unmatched '" + std::string(op) + "'", pos);
      }
      push(Tok::op, std::string(op), pos);
      i += op.size();
    }
  }

  std::size_t scan_number(const std::string& line, std::size_t i, SourcePos pos) {
    std::string digits;
    std::size_t j = i;
    auto take_digits = [&] {
      while (j < line.size() && (std::isdigit(static_cast<unsigned char>(line[j])) || line[j] == '_')) {
        if (line[j] != '_') digits.push_back(line[j]);
        ++j;
      }
    };
    take_digits();
    if (j < line.size() && line[j] == '.') {
      digits.push_back('.');
      ++j;
      take_digits();
    }
    if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
      if (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) {
        digits.append(line, j, k - j);
        j = k;
        take_digits();
      }
    }
    if (j < line.size() && (std::isalpha(static_cast<unsigned char>(line[j])) || line[j] == '_')) {
      fail("invalid numeric literal", pos);
    }
    double value = 0.0;
    std::string text = digits;
    if (text.front() == '.') text.insert(text.begin(), '0');
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("invalid numeric literal", pos);
    push(Tok::number, line.substr(i, j - i), pos, value);
    return j;
  }

  std::vector<Token> tokens_;
  std::vector<int> indents_;
  int depth_ = 0;
  bool pending_ = false;
  bool backslash_ = false;
  int logical_indent_ = 0;
  SourcePos end_pos_;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  SkillAst program() {
    SkillAst ast;
    while (peek().kind != Tok::end) {
      if (peek().kind == Tok::indent) fail("unexpected indent", peek().pos);
      if (peek().kind == Tok::newline) {
        advance();
        continue;
      }
      ast.statements.push_back(statement());
    }
    if (ast.statements.empty()) fail("no statements", peek().pos);
    return ast;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
  bool is_op(const char* text, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::op && peek(ahead).text == text;
  }
  bool is_name(const char* text) const { return peek().kind == Tok::name && peek().text == text; }
  void expect_op(const char* text) {
    if (!is_op(text)) fail(std::string("expected '") + text + "'" + found(), peek().pos);
    advance();
  }
  std::string found() const {
    const auto& t = peek();
    switch (t.kind) {
      case Tok::newline: return " but found end of line";
      case Tok::end: return " but found end of input";
      case Tok::indent: return " but found an indent";
      case Tok::dedent: return " but found a dedent";
      default: return " but found '" + t.text + "'";
    }
  }

  void check_forbidden(const Token& t) const {
    if (t.kind == Tok::name && kForbiddenKeywords.contains(t.text)) fail(forbidden_message(t.text), t.pos);
  }

  Stmt statement() {
    const Token& t = peek();
    if (t.kind != Tok::name) fail("expected a statement" + found(), t.pos);
    check_forbidden(t);
    if (t.text == "if") return if_chain();
    if (t.text == "elif" || t.text == "else") fail("'" + t.text + "' without a matching 'if'", t.pos);
    Stmt stmt = simple_statement();
    end_of_line();
    return stmt;
  }

  void end_of_line() {
    if (is_op(";")) fail("multiple statements on one line are not supported", peek().pos);
    if (peek().kind != Tok::newline && peek().kind != Tok::end) fail("expected end of line" + found(), peek().pos);
    if (peek().kind == Tok::newline) advance();
  }

  Stmt simple_statement() {
    const Token& t = peek();
    if (t.text != "value") {
      if (is_op(".", 1)) fail("attribute access is not allowed", peek(1).pos);
      if (is_op("=", 1) || is_op("+=", 1) || is_op("-=", 1) || is_op("*=", 1) || is_op("/=", 1)) {
        fail("only value[0] may be assigned", t.pos);
      }
      if (is_op("[", 1)) fail("subscripts other than value[0] are not allowed", peek(1).pos);
      fail("expected 'value[0] += ...' or an if statement", t.pos);
    }
    const SourcePos pos = t.pos;
    advance();
    if (is_op(".")) fail("attribute access is not allowed", peek().pos);
    expect_op("[");
    if (peek().kind != Tok::number || peek().number != 0.0 || peek().text != "0") {
      fail("subscripts other than value[0] are not allowed", peek().pos);
    }
    advance();
    expect_op("]");
    if (is_op("[") || is_op(".")) fail("subscripts other than value[0] are not allowed", peek().pos);
    const Token& op = peek();
    AugOp aug;
    if (op.kind == Tok::op && op.text == "+=") {
      aug = AugOp::add;
    } else if (op.kind == Tok::op && op.text == "-=") {
      aug = AugOp::sub;
    } else if (op.kind == Tok::op && op.text == "*=") {
      aug = AugOp::mul;
    } else if (op.kind == Tok::op && op.text == "/=") {
      aug = AugOp::div;
    } else if (op.kind == Tok::op && op.text == "=") {
      fail("plain assignment is not allowed; use value[0] += ...", op.pos);
    } else {
      fail("expected an augmented assignment operator" + found(), op.pos);
    }
    advance();
    return Stmt{AugAssign{aug, expression()}, pos};
  }

  Stmt if_chain() {
    const SourcePos pos = peek().pos;
    IfChain chain;
    advance();  // if
    chain.branches.push_back(branch_rest());
    while (is_name("elif")) {
      advance();
      chain.branches.push_back(branch_rest());
    }
    if (is_name("else")) {
      advance();
      expect_op(":");
      chain.orelse = suite();
    }
    return Stmt{std::move(chain), pos};
  }

  Branch branch_rest() {
    Branch branch;
    branch.condition = expression();
    expect_op(":");
    branch.body = suite();
    return branch;
  }

  Block suite() {
    Block block;
    if (peek().kind != Tok::newline) {
      if (peek().kind == Tok::end) fail("expected an indented block", peek().pos);
      check_forbidden(peek());
      if (is_name("if")) fail("an if statement must start on its own line", peek().pos);
      block.push_back(simple_statement());
      end_of_line();
      return block;
    }
    advance();
    if (peek().kind != Tok::indent) fail("expected an indented block", peek().pos);
    advance();
    while (peek().kind != Tok::dedent && peek().kind != Tok::end) {
      if (peek().kind == Tok::indent) fail("unexpected indent", peek().pos);
      block.push_back(statement());
    }
    if (peek().kind == Tok::dedent) advance();
    return block;
  }

  ExprPtr expression() { return or_expr(); }

  ExprPtr or_expr() {
    const SourcePos pos = peek().pos;
    std::vector<ExprPtr> operands{and_expr()};
    while (is_name("or")) {
      advance();
      operands.push_back(and_expr());
    }
    if (operands.size() == 1) return operands.front();
    return make_logical(LogicalOp::logical_or, std::move(operands), pos);
  }

  ExprPtr and_expr() {
    const SourcePos pos = peek().pos;
    std::vector<ExprPtr> operands{not_expr()};
    while (is_name("and")) {
      advance();
      operands.push_back(not_expr());
    }
    if (operands.size() == 1) return operands.front();
    return make_logical(LogicalOp::logical_and, std::move(operands), pos);
  }

  ExprPtr not_expr() {
    if (is_name("not")) {
      const SourcePos pos = advance().pos;
      return make_unary(UnaryOp::logical_not, not_expr(), pos);
    }
    return comparison();
  }

  std::optional<CompareOp> compare_op() const {
    if (peek().kind != Tok::op) return std::nullopt;
    const auto& s = peek().text;
    if (s == "<") return CompareOp::lt;
    if (s == "<=") return CompareOp::le;
    if (s == ">") return CompareOp::gt;
    if (s == ">=") return CompareOp::ge;
    if (s == "==") return CompareOp::eq;
    if (s == "!=") return CompareOp::ne;
    return std::nullopt;
  }

  ExprPtr comparison() {
    const SourcePos pos = peek().pos;
    ExprPtr first = arith();
    std::vector<std::pair<CompareOp, ExprPtr>> rest;
    while (auto op = compare_op()) {
      advance();
      rest.emplace_back(*op, arith());
    }
    if (rest.empty()) return first;
    return make_compare(std::move(first), std::move(rest), pos);
  }

  ExprPtr arith() {
    ExprPtr lhs = term();
    while (is_op("+") || is_op("-")) {
      const Token& op = advance();
      lhs = make_binary(op.text == "+" ? BinaryOp::add : BinaryOp::sub, lhs, term(), op.pos);
    }
    return lhs;
  }

  ExprPtr term() {
    ExprPtr lhs = factor();
    while (is_op("*") || is_op("/") || is_op("//") || is_op("%")) {
      const Token& op = advance();
      BinaryOp kind = op.text == "*"    ? BinaryOp::mul
                      : op.text == "/"  ? BinaryOp::div
                      : op.text == "//" ? BinaryOp::floordiv
                                        : BinaryOp::mod;
      lhs = make_binary(kind, lhs, factor(), op.pos);
    }
    if (is_op("@") || is_op("&") || is_op("|") || is_op("^") || is_op("<<") || is_op(">>")) {
      fail("operator '" + peek().text + "' is not allowed", peek().pos);
    }
    return lhs;
  }

  ExprPtr factor() {
    if (is_op("-") || is_op("+")) {
      const Token& op = advance();
      return make_unary(op.text == "-" ? UnaryOp::neg : UnaryOp::pos, factor(), op.pos);
    }
    if (is_op("~")) fail("operator '~' is not allowed", peek().pos);
    return power();
  }

  ExprPtr power() {
    ExprPtr base = atom();
    if (is_op("**")) {
      const Token& op = advance();
      return make_binary(BinaryOp::pow, base, factor(), op.pos);
    }
    return base;
  }

  ExprPtr atom() {
    const Token& t = peek();
    ExprPtr result;
    if (t.kind == Tok::number) {
      advance();
      result = make_number(t.number, t.pos);
    } else if (t.kind == Tok::name) {
      check_forbidden(t);
      if (t.text == "if" || t.text == "else" || t.text == "elif") fail("conditional expressions are not supported", t.pos);
      if (t.text == "and" || t.text == "or" || t.text == "not") fail("expected an operand" + found(), t.pos);
      advance();
      if (is_op("(")) {
        result = call(t);
      } else if (is_op("[")) {
        fail(t.text == "value" ? "value[0] may only appear as the assignment target"
                               : "subscripts other than value[0] are not allowed",
             peek().pos);
      } else {
        result = make_name(t.text, t.pos);
      }
    } else if (is_op("(")) {
      advance();
      result = expression();
      if (is_op(",")) fail("tuples are not allowed", peek().pos);
      expect_op(")");
    } else if (is_op("[") || is_op("{")) {
      fail("list, set and dict literals are not allowed", t.pos);
    } else {
      fail("expected an expression" + found(), t.pos);
    }
    if (is_op(".")) fail("attribute access is not allowed", peek().pos);
    if (is_op("[")) fail("subscripts other than value[0] are not allowed", peek().pos);
    if (is_op("(")) fail("only builtin functions may be called", peek().pos);
    return result;
  }

  ExprPtr call(const Token& func) {
    expect_op("(");
    std::vector<ExprPtr> args;
    while (!is_op(")")) {
      if (peek().kind == Tok::name && is_op("=", 1)) fail("keyword arguments are not allowed", peek().pos);
      if (is_op("*") || is_op("**")) fail("argument unpacking is not allowed", peek().pos);
      args.push_back(expression());
      if (is_op(",")) {
        advance();
      } else if (!is_op(")")) {
        fail("expected ',' or ')'" + found(), peek().pos);
      }
    }
    advance();
    return make_call(func.text, std::move(args), func.pos);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

SkillAst parse(std::string_view code) {
  Lexer lexer;
  Parser parser(lexer.run(code));
  return parser.program();
}

}  // namespace tsevo::dsl
