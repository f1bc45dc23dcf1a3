#include "reference_eval.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <regex>
#include <sstream>
#include <vector>

namespace ref {

namespace {

struct Line {
  int indent;
  std::string text;
};

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

int leading(const std::string& s) {
  int n = 0;
  while (n < static_cast<int>(s.size()) && s[n] == ' ') ++n;
  return n;
}

int bracket_delta(const std::string& s) {
  int d = 0;
  for (char c : s) {
    if (c == '(' || c == '[') ++d;
    if (c == ')' || c == ']') --d;
  }
  return d;
}

// Joins physical lines into logical lines.
std::vector<Line> logical_lines(const std::string& source) {
  std::vector<std::string> raw;
  std::stringstream in(source);
  for (std::string s; std::getline(in, s);) {
    if (auto h = s.find('#'); h != std::string::npos) s.erase(h);
    s = rstrip(s);
    if (!s.empty()) raw.push_back(s);
  }
  int base = raw.empty() ? 0 : 1 << 20;
  for (const auto& s : raw) base = std::min(base, leading(s));
  std::vector<Line> out;
  int depth = 0;
  bool joined = false;
  for (auto s : raw) {
    s.erase(0, static_cast<std::size_t>(base));
    const int ind = leading(s);
    std::string body = s.substr(static_cast<std::size_t>(ind));
    bool slash = body.back() == '\\';
    if (slash) body.pop_back();
    if (!out.empty() && (depth > 0 || joined || (ind > out.back().indent && out.back().text.back() != ':'))) {
      out.back().text += " " + body;
    } else {
      out.push_back({ind, body});
    }
    depth += bracket_delta(body);
    joined = slash;
  }
  return out;
}

double pymod(double a, double b) {
  double r = std::fmod(a, b);
  if (r == 0.0) return std::copysign(0.0, b);
  if (std::signbit(r) != std::signbit(b)) r += b;
  return r;
}

double finite(double v) {
  if (!std::isfinite(v)) throw Failure("non-finite");
  return v;
}

double arith(char op, double a, double b) {
  switch (op) {
    case '+': return finite(a + b);
    case '-': return finite(a - b);
    case '*': return finite(a * b);
    case '/':
      if (b == 0.0) throw Failure("div0");
      return finite(a / b);
    case 'f': {
      if (b == 0.0) throw Failure("div0");
      const double m = pymod(a, b);
      double q = std::nearbyint((a - m) / b);
      if (q == 0.0) q = std::copysign(0.0, a / b);
      return finite(q);
    }
    case '%':
      if (b == 0.0) throw Failure("div0");
      return finite(pymod(a, b));
    case '^':
      if (a == 0.0 && b < 0.0) throw Failure("0**neg");
      if (a < 0.0 && std::trunc(b) != b) throw Failure("complex");
      return finite(std::pow(a, b));
  }
  throw Failure("op");
}

const std::map<std::string, std::string>& shorthand() {
  static const std::map<std::string, std::string> m = {
      {"waiting", "num_waiting_vehicle"}, {"dist", "vehicle_dist"}, {"vehicles", "num_vehicle"}};
  return m;
}

double lookup(const Bindings& vars, const std::string& name) {
  static const std::regex in_alias(R"(^inlane_[0-9]+_(num_vehicle|num_waiting_vehicle|vehicle_dist)$)");
  static const std::regex out_alias(R"(^outlane_[0-9]+_(num_vehicle|vehicle_dist)$)");
  std::string key = name;
  std::smatch m;
  if (std::regex_match(name, m, in_alias) || std::regex_match(name, m, out_alias)) key = m[1];
  if (auto s = shorthand().find(name); s != shorthand().end()) key = s->second;
  auto it = vars.find(key);
  if (it == vars.end()) throw Failure("unbound " + name);
  return it->second;
}

struct Val {
  double v = 0.0;
  int nodes = 0;
  bool number = false;   // a bare numeric literal
  bool literal = false;  // number, or sign applied to a number
  bool compare = false;
};

// Pratt parser that evaluates as it goes. When `live` is false the text is
// still parsed and counted but nothing is computed.
class Expr {
 public:
  Expr(const std::string& text, const Bindings& vars) : s_(text), vars_(vars) {}

  Val parse(int min_bp, bool live) {
    Val lhs = prefix(live);
    for (;;) {
      skip();
      std::string op = peek_op();
      if (op.empty()) break;
      if (op == "or" || op == "and") {
        const int bp = op == "or" ? 1 : 2;
        if (bp <= min_bp) break;
        Val out;
        out.nodes = 1 + lhs.nodes;
        bool decided = false;
        double v = lhs.v;
        if (live) decided = op == "or" ? v != 0.0 : v == 0.0;
        while (peek_op() == op) {
          take(op);
          Val rhs = parse(bp, live && !decided);
          out.nodes += rhs.nodes;
          if (live && !decided) {
            v = rhs.v;
            decided = op == "or" ? v != 0.0 : v == 0.0;
          }
        }
        out.v = v;
        lhs = out;
        continue;
      }
      if (is_compare(op)) {
        if (4 <= min_bp) break;
        Val out;
        out.nodes = 1 + lhs.nodes;
        out.compare = true;
        bool holds = true;
        double left = lhs.v;
        while (is_compare(peek_op())) {
          std::string cop = peek_op();
          take(cop);
          Val rhs = parse(4, live && holds);
          out.nodes += rhs.nodes;
          if (live && holds) {
            holds = cmp(cop, left, rhs.v);
            left = rhs.v;
          }
        }
        out.v = holds ? 1.0 : 0.0;
        lhs = out;
        continue;
      }
      int bp = 0;
      char code = 0;
      if (op == "+" || op == "-") {
        bp = 5;
        code = op[0];
      } else if (op == "*" || op == "/" || op == "%") {
        bp = 6;
        code = op[0];
      } else if (op == "//") {
        bp = 6;
        code = 'f';
      } else if (op == "**") {
        bp = 8;
        code = '^';
      } else {
        break;
      }
      if (bp <= min_bp) break;
      take(op);
      Val rhs = parse(code == '^' ? 7 : bp, live);
      Val out;
      out.nodes = 1 + lhs.nodes + rhs.nodes;
      if (live) out.v = arith(code, lhs.v, rhs.v);
      lhs = out;
    }
    return lhs;
  }

  void finish() {
    skip();
    if (i_ != s_.size()) throw Failure("trailing text: " + s_.substr(i_));
  }

 private:
  static bool is_compare(const std::string& op) {
    return op == "<" || op == "<=" || op == ">" || op == ">=" || op == "==" || op == "!=";
  }
  static bool cmp(const std::string& op, double a, double b) {
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "==") return a == b;
    return a != b;
  }

  void skip() {
    while (i_ < s_.size() && s_[i_] == ' ') ++i_;
  }

  std::string peek_op() {
    skip();
    if (i_ >= s_.size()) return "";
    static const char* ops[] = {"**", "//", "<=", ">=", "==", "!=", "+", "-", "*", "/", "%", "<", ">"};
    for (const char* o : ops) {
      if (s_.compare(i_, std::strlen(o), o) == 0) return o;
    }
    for (const char* w : {"and", "or"}) {
      const std::size_t n = std::strlen(w);
      if (s_.compare(i_, n, w) == 0 && (i_ + n == s_.size() || !std::isalnum(static_cast<unsigned char>(s_[i_ + n])))) {
        return w;
      }
    }
    return "";
  }

  void take(const std::string& tok) {
    skip();
    if (s_.compare(i_, tok.size(), tok) != 0) throw Failure("expected " + tok);
    i_ += tok.size();
  }

  std::string word() {
    skip();
    std::size_t j = i_;
    while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
    std::string w = s_.substr(i_, j - i_);
    i_ = j;
    return w;
  }

  Val prefix(bool live) {
    skip();
    if (i_ >= s_.size()) throw Failure("unexpected end");
    const char c = s_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const double v = std::strtod(s_.c_str() + i_, &end);
      i_ = static_cast<std::size_t>(end - s_.c_str());
      Val out;
      out.v = v;
      out.number = out.literal = true;
      return out;
    }
    if (c == '-' || c == '+') {
      ++i_;
      Val operand = parse(7, live);
      Val out;
      out.literal = operand.number;
      out.nodes = out.literal ? 0 : 1 + operand.nodes;
      out.v = c == '-' ? -operand.v : operand.v;
      return out;
    }
    if (c == '(') {
      ++i_;
      Val inner = parse(0, live);
      take(")");
      return inner;
    }
    std::string name = word();
    if (name.empty()) throw Failure(std::string("bad character ") + c);
    if (name == "not") {
      Val operand = parse(3, live);
      Val out;
      out.nodes = 1 + operand.nodes;
      out.v = operand.v == 0.0 ? 1.0 : 0.0;
      return out;
    }
    skip();
    if (i_ < s_.size() && s_[i_] == '(') return call(name, live);
    Val out;
    out.nodes = 1;
    if (live) out.v = lookup(vars_, name);
    return out;
  }

  std::vector<Val> args(bool live) {
    take("(");
    std::vector<Val> out;
    skip();
    while (s_[i_] != ')') {
      out.push_back(parse(0, live));
      skip();
      if (s_[i_] == ',') {
        ++i_;
        skip();
      }
    }
    ++i_;
    return out;
  }

  Val call(const std::string& name, bool live) {
    Val out;
    out.nodes = 1;
    if (name == "sum" || name == "len") {
      take("(");
      if (word() != "range") throw Failure(name + " needs range");
      auto r = args(live);
      take(")");
      out.nodes += 1;
      for (auto& a : r) out.nodes += a.nodes;
      if (r.empty() || r.size() > 3) throw Failure("range arity");
      if (!live) return out;
      std::vector<long long> ints;
      for (auto& a : r) {
        if (a.v != std::floor(a.v) || std::fabs(a.v) > 1e9) throw Failure("range arg");
        ints.push_back(static_cast<long long>(a.v));
      }
      long long start = ints.size() == 1 ? 0 : ints[0];
      long long stop = ints.size() == 1 ? ints[0] : ints[1];
      long long step = ints.size() == 3 ? ints[2] : 1;
      if (step == 0) throw Failure("range step");
      double total = 0.0, count = 0.0;
      for (long long k = start; step > 0 ? k < stop : k > stop; k += step) {
        total += static_cast<double>(k);
        count += 1.0;
      }
      out.v = name == "sum" ? total : count;
      return out;
    }
    auto a = args(live);
    for (auto& x : a) out.nodes += x.nodes;
    if (name == "min" || name == "max") {
      if (a.size() < 2) throw Failure("arity");
      if (!live) return out;
      double best = a[0].v;
      for (std::size_t k = 1; k < a.size(); ++k) {
        if (name == "min" ? a[k].v < best : a[k].v > best) best = a[k].v;
      }
      out.v = best;
    } else if (name == "abs") {
      if (a.size() != 1) throw Failure("arity");
      out.v = std::fabs(a[0].v);
    } else {
      throw Failure("function " + name);
    }
    return out;
  }

  std::string s_;
  const Bindings& vars_;
  std::size_t i_ = 0;
};

struct Runner {
  const std::vector<Line>& lines;
  const Bindings& vars;
  double value = 0.0;
  int nodes = 0;

  Val expr(const std::string& text, bool live) {
    Expr e(text, vars);
    Val v = e.parse(0, live);
    e.finish();
    return v;
  }

  void statement(const std::string& text, bool live) {
    static const std::regex aug(R"(^value\[0\]\s*([-+*/])=\s*(.+)$)");
    std::smatch m;
    if (!std::regex_match(text, m, aug)) throw Failure("bad statement: " + text);
    Val rhs = expr(m[2], live);
    nodes += 2 + rhs.nodes;
    if (live) value = arith(m.str(1)[0], value, rhs.v);
  }

  static bool starts(const std::string& s, const char* w) { return s.rfind(w, 0) == 0; }

  // Splits "if cond: rest" at the first colon.
  static std::pair<std::string, std::string> header(const std::string& text, std::size_t kw) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw Failure("missing colon");
    std::string rest = text.substr(colon + 1);
    while (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    return {text.substr(kw, colon - kw), rest};
  }

  // Runs a suite; returns (next line, depth).
  std::pair<std::size_t, int> suite(std::size_t i, const std::string& inline_text, int indent, bool live) {
    if (!inline_text.empty()) {
      statement(inline_text, live);
      return {i + 1, 0};
    }
    if (i + 1 >= lines.size() || lines[i + 1].indent <= indent) throw Failure("expected block");
    return block(i + 1, lines[i + 1].indent, live);
  }

  std::pair<std::size_t, int> block(std::size_t i, int indent, bool live) {
    int depth = 0;
    while (i < lines.size() && lines[i].indent == indent) {
      const std::string& t = lines[i].text;
      if (!starts(t, "if ") && !starts(t, "if(")) {
        statement(t, live);
        ++i;
        continue;
      }
      bool taken = false;
      int inner = 0;
      bool first = true;
      while (i < lines.size() && lines[i].indent == indent) {
        const std::string& h = lines[i].text;
        if (first || starts(h, "elif ") || starts(h, "elif(")) {
          auto [cond, rest] = header(h, first ? 2 : 4);
          const bool test_live = live && !taken;
          Val c = expr(cond, test_live);
          nodes += 1 + c.nodes - (c.compare ? 1 : 0);
          const bool run_body = test_live && c.v != 0.0;
          auto [next, d] = suite(i, rest, indent, run_body);
          taken = taken || run_body;
          inner = std::max(inner, d);
          i = next;
          first = false;
        } else if (starts(h, "else")) {
          auto [cond, rest] = header(h, 4);
          auto [next, d] = suite(i, rest, indent, live && !taken);
          inner = std::max(inner, d);
          i = next;
          break;
        } else {
          break;
        }
      }
      depth = std::max(depth, 1 + inner);
    }
    if (i < lines.size() && lines[i].indent > indent) throw Failure("unexpected indent");
    return {i, depth};
  }
};

}  // namespace

double run(const std::string& source, const Bindings& vars) {
  const auto lines = logical_lines(source);
  if (lines.empty()) throw Failure("empty");
  Runner r{lines, vars};
  auto [end, depth] = r.block(0, lines[0].indent, true);
  if (end != lines.size()) throw Failure("dangling lines");
  return r.value;
}

Counts count(const std::string& source) {
  const auto lines = logical_lines(source);
  if (lines.empty()) throw Failure("empty");
  static const Bindings none;
  Runner r{lines, none};
  auto [end, depth] = r.block(0, lines[0].indent, false);
  if (end != lines.size()) throw Failure("dangling lines");
  return Counts{r.nodes, depth};
}

}  // namespace ref
