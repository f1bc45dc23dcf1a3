#include "tsevo/gen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "tsevo/dsl/parser.hpp"
#include "tsevo/dsl/printer.hpp"
#include "tsevo/dsl/validate.hpp"

namespace tsevo::gen {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

std::string_view event_hint(events::EventKind kind) {
  switch (kind) {
    case events::EventKind::emergency:
      return "For emergency preemption, immediately switch to the phase that clears the emergency vehicle's path "
             "(emergency_phase == index), scaled by how close it is.";
    case events::EventKind::transit:
      return "For transit priority, favour phases serving approaching buses (bus_count, bus_delay) without "
             "starving general traffic.";
    case events::EventKind::incident:
      return "For incidents, keep traffic moving around blocked lanes (incident_blocked) instead of serving queues "
             "that cannot discharge.";
    case events::EventKind::congestion:
      return "For severe congestion, respond nonlinearly to queue growth and scale with congestion_level.";
  }
  return "";
}

}  // namespace

PromptBundle build_prompts(const Skill& elite, const MetricSummary& metrics, std::string_view direction,
                           const dsl::VariableWhitelist& whitelist, std::optional<events::EventKind> event_kind) {
  std::ostringstream sys;
  sys << "You are a traffic signal control strategy optimization expert. You improve skills that choose the next "
         "signal phase at an intersection.\n\n"
         "A skill is a JSON object with four string fields:\n"
         "  \"description\": the strategy rationale\n"
         "  \"guidance\": when and how the strategy should be applied\n"
         "  \"inlane_code\": code run once per incoming lane of each phase\n"
         "  \"outlane_code\": code run once per outgoing lane of each phase\n"
         "Each phase's score is the sum of both bodies over its lane-links; the phase with the highest score gets "
         "green.\n\n"
         "Variables:\n"
         "  inlane: num_vehicle, num_waiting_vehicle, vehicle_dist\n"
         "  outlane: num_vehicle, vehicle_dist\n"
         "  value[0]: the score accumulator (update with +=, -=, *=, /=)\n"
         "  index: the phase being scored (0-3)\n";
  if (whitelist.has_event_variables() || event_kind) {
    sys << "  event context (same for every lane of the intersection): emergency_distance, emergency_phase, "
           "bus_count, bus_delay, incident_blocked, congestion_level\n";
  }
  sys << "\nAllowed: arithmetic (+ - * / // % **), comparisons, and/or/not, if/elif/else, numeric literals and the "
         "builtins min, max, abs, sum, len, range.\n"
         "Forbidden: imports, function definitions, lambda expressions, attribute access, loops, strings, and any "
         "name not listed above.\n\n"
         "Strategy hints: conditional branching on queue thresholds, nonlinear transforms such as squares, saturation "
         "detection with min/max, and combinations of several variables.\n";
  if (event_kind) sys << event_hint(*event_kind) << "\n";
  sys << "\nReply with a single JSON object and nothing else.";

  std::ostringstream user;
  user << "Current elite skill:\n"
       << "Description: " << elite.description << "\n"
       << "Guidance: " << elite.guidance << "\n"
       << "inlane_code:\n" << elite.inlane_code << "\n"
       << "outlane_code:\n" << elite.outlane_code << "\n\n"
       << "Performance: average delay " << fmt(metrics.avg_delay) << " s, average queue " << fmt(metrics.avg_queue)
       << " vehicles, throughput " << fmt(metrics.throughput) << " vehicles.\n\n"
       << "Direction: " << (direction.empty() ? kNeutralDirection : direction) << "\n\n"
       << "Write an improved variant of this skill.";
  return {sys.str(), user.str()};
}

Skill parse_draft(std::string_view reply) {
  std::string_view body = reply;
  if (const auto fence = reply.find("```"); fence != std::string_view::npos) {
    const auto start = reply.find('\n', fence);
    const auto end = start == std::string_view::npos ? start : reply.find("```", start);
    if (end != std::string_view::npos) body = reply.substr(start + 1, end - start - 1);
  }
  const auto open = body.find('{');
  const auto close = body.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw InvalidDraft("reply holds no JSON object");
  }
  json j;
  try {
    j = json::parse(body.substr(open, close - open + 1));
  } catch (const json::parse_error& e) {
    throw InvalidDraft(std::string("reply is not valid JSON: ") + e.what());
  }
  Skill s;
  for (const char* field : {"description", "guidance", "inlane_code", "outlane_code"}) {
    if (!j.contains(field) || !j[field].is_string()) throw InvalidDraft(std::string("missing string field '") + field + "'");
  }
  s.description = j["description"].get<std::string>();
  s.guidance = j["guidance"].get<std::string>();
  s.inlane_code = j["inlane_code"].get<std::string>();
  s.outlane_code = j["outlane_code"].get<std::string>();
  return s;
}

// Scripted mutator --------------------------------------------------------

std::string_view mutation_name(Mutation m) {
  switch (m) {
    case Mutation::coefficient: return "coefficient";
    case Mutation::threshold: return "threshold";
    case Mutation::wrap_if: return "wrap_if";
    case Mutation::term: return "term";
    case Mutation::rewrite: return "rewrite";
  }
  return "?";
}

namespace {

using namespace dsl;

// Where a literal sits, which limits how it may change.
enum class Site { plain, exponent, divisor, compare };

using NumberFn = std::function<std::optional<double>(double, Site)>;

ExprPtr map_expr(const ExprPtr& e, const NumberFn& fn, Site site);

std::vector<ExprPtr> map_all(const std::vector<ExprPtr>& xs, const NumberFn& fn, Site site) {
  std::vector<ExprPtr> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(map_expr(x, fn, site));
  return out;
}

ExprPtr map_expr(const ExprPtr& e, const NumberFn& fn, Site site) {
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          if (auto v = fn(n.value, site)) return make_number(*v, e->pos);
          return e;
        } else if constexpr (std::is_same_v<T, Name>) {
          return e;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return make_unary(n.op, map_expr(n.operand, fn, site), e->pos);
        } else if constexpr (std::is_same_v<T, Binary>) {
          Site rhs = site;
          if (n.op == BinaryOp::pow) rhs = Site::exponent;
          if (n.op == BinaryOp::div || n.op == BinaryOp::floordiv || n.op == BinaryOp::mod) rhs = Site::divisor;
          return make_binary(n.op, map_expr(n.lhs, fn, site == Site::compare ? Site::plain : site),
                             map_expr(n.rhs, fn, rhs), e->pos);
        } else if constexpr (std::is_same_v<T, Compare>) {
          std::vector<std::pair<CompareOp, ExprPtr>> rest;
          for (const auto& [op, x] : n.rest) rest.emplace_back(op, map_expr(x, fn, Site::compare));
          return make_compare(map_expr(n.first, fn, Site::compare), std::move(rest), e->pos);
        } else if constexpr (std::is_same_v<T, Logical>) {
          return make_logical(n.op, map_all(n.operands, fn, site), e->pos);
        } else {
          // Literals inside a call keep the caller's site: max(1, dist) under
          // a division is still a divisor.
          return make_call(n.func, map_all(n.args, fn, site == Site::compare ? Site::plain : site), e->pos);
        }
      },
      e->node);
}

Block map_block(const Block& block, const NumberFn& fn) {
  Block out;
  for (const auto& st : block) {
    if (const auto* a = std::get_if<AugAssign>(&st.node)) {
      Site site = (a->op == AugOp::div) ? Site::divisor : Site::plain;
      out.push_back(Stmt{AugAssign{a->op, map_expr(a->value, fn, site)}, st.pos});
    } else {
      const auto& chain = std::get<IfChain>(st.node);
      IfChain c;
      for (const auto& br : chain.branches) c.branches.push_back({map_expr(br.condition, fn, Site::plain), map_block(br.body, fn)});
      if (chain.orelse) c.orelse = map_block(*chain.orelse, fn);
      out.push_back(Stmt{std::move(c), st.pos});
    }
  }
  return out;
}

struct Literal {
  double value;
  Site site;
};

std::vector<Literal> literals(const SkillAst& ast) {
  std::vector<Literal> out;
  map_block(ast.statements, [&](double v, Site s) -> std::optional<double> {
    out.push_back({v, s});
    return std::nullopt;
  });
  return out;
}

SkillAst replace_literal(const SkillAst& ast, std::size_t target, double value) {
  std::size_t k = 0;
  return SkillAst{map_block(ast.statements, [&](double, Site) -> std::optional<double> {
    return k++ == target ? std::optional<double>(value) : std::nullopt;
  })};
}

template <typename T>
const T& pick(const std::vector<T>& xs, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
  return xs[d(rng)];
}

bool chance(double p, std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

std::string indent(const std::string& code) {
  std::string out = "    ";
  for (char c : code) {
    out += c;
    if (c == '\n') out += "    ";
  }
  return out;
}

const std::vector<double> kScale = {2.0, 3.0, 0.5};
const std::vector<double> kWeight = {1.0, 1.5, 2.0, 3.0, 4.0};
const std::vector<double> kSmall = {0.1, 0.2, 0.25, 0.5, 1.0};
const std::vector<double> kThreshold = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0};

struct Edit {
  std::string code;
  std::string note;
};

// Variables a body may read, lane features first.
std::vector<std::string> readable(bool inlane, bool events) {
  std::vector<std::string> v = {"num_vehicle", "vehicle_dist"};
  if (inlane) v.push_back("num_waiting_vehicle");
  if (events) {
    for (const char* e : {"emergency_distance", "bus_count", "bus_delay", "incident_blocked", "congestion_level"}) {
      v.push_back(e);
    }
  }
  return v;
}

std::string substitute(std::string text, std::mt19937_64& rng) {
  auto fill = [&](const std::string& key, const std::vector<double>& pool) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos)) {
      const std::string v = fmt(pick(pool, rng));
      text.replace(pos, key.size(), v);
      pos += v.size();
    }
  };
  fill("{a}", kWeight);
  fill("{b}", kSmall);
  fill("{t}", kThreshold);
  fill("{r}", {150.0, 200.0, 250.0});
  return text;
}

std::vector<std::string> inlane_templates(std::optional<events::EventKind> kind) {
  std::vector<std::string> t = {
      "value[0] += num_waiting_vehicle * {a} + num_vehicle * {b}",
      "value[0] += num_waiting_vehicle * {a} / max(1, vehicle_dist)",
      "if num_waiting_vehicle > {t}:\n    value[0] += num_waiting_vehicle ** 2\nelse:\n    value[0] += num_waiting_vehicle * {a}",
      "value[0] += max(num_waiting_vehicle, num_vehicle * {b})",
      "value[0] += num_waiting_vehicle + min({t}, num_vehicle) * {b}",
      "value[0] += num_waiting_vehicle * ({a} + 1 - index % 2)",
      "value[0] += num_waiting_vehicle ** 2 + num_vehicle * {b}",
  };
  if (!kind) return t;
  switch (*kind) {
    case events::EventKind::emergency:
      t.push_back(
          "if emergency_distance > 0:\n    if emergency_phase == index:\n        value[0] += max(0, {r} - "
          "emergency_distance) * {a}\n    else:\n        value[0] += num_waiting_vehicle * {a}\nelse:\n    value[0] += "
          "num_waiting_vehicle * {a}");
      t.push_back("value[0] += num_waiting_vehicle\nif emergency_phase == index:\n    value[0] += {r} / max(1, emergency_distance)");
      break;
    case events::EventKind::transit:
      t.push_back("if bus_count > 0:\n    value[0] += num_waiting_vehicle * {a} + num_vehicle * {b}\nelse:\n    value[0] += num_waiting_vehicle");
      t.push_back("value[0] += num_waiting_vehicle * {a} + num_vehicle / max(1, vehicle_dist)");
      break;
    case events::EventKind::incident:
      t.push_back(
          "if incident_blocked > 0:\n    value[0] += max(0, num_vehicle - num_waiting_vehicle) * {a}\nelse:\n    "
          "value[0] += num_waiting_vehicle * {a}");
      break;
    case events::EventKind::congestion:
      t.push_back("value[0] += num_waiting_vehicle ** 2\nif congestion_level > 1:\n    value[0] += num_waiting_vehicle * congestion_level * {a}");
      break;
  }
  return t;
}

const std::vector<std::string> kOutlaneTemplates = {
    "value[0] += 0",
    "value[0] -= num_vehicle * {b}",
    "value[0] += max(0, vehicle_dist - {t}) * {b}",
    "value[0] -= min({t}, num_vehicle) * {b}",
};

Edit rewrite(bool inlane, std::optional<events::EventKind> kind, std::mt19937_64& rng) {
  const auto& pool = inlane ? inlane_templates(kind) : kOutlaneTemplates;
  return {substitute(pick(pool, rng), rng), "replaced the body with a new structure"};
}

std::optional<Edit> coefficient(const SkillAst& ast, std::mt19937_64& rng) {
  std::vector<std::size_t> sites;
  const auto lits = literals(ast);
  for (std::size_t i = 0; i < lits.size(); ++i) {
    if (lits[i].site != Site::compare) sites.push_back(i);
  }
  if (sites.empty()) {
    // No literal to adjust: scale the first update instead.
    const double k = pick(std::vector<double>{2.0, 0.5}, rng);
    Block body = ast.statements;
    for (auto& st : body) {
      if (auto* a = std::get_if<AugAssign>(&st.node)) {
        a->value = make_binary(BinaryOp::mul, a->value, make_number(k));
        return Edit{to_source(SkillAst{body}), "scaled an update by " + fmt(k)};
      }
    }
    return std::nullopt;
  }
  const std::size_t target = pick(sites, rng);
  const Literal lit = lits[target];
  const std::vector<std::pair<std::string, std::function<double(double)>>> ops = {
      {"+1", [](double v) { return v + 1; }}, {"-1", [](double v) { return v - 1; }},
      {"+2", [](double v) { return v + 2; }}, {"-2", [](double v) { return v - 2; }},
      {"x2", [](double v) { return v * 2; }}, {"x0.5", [](double v) { return v * 0.5; }},
  };
  const auto& [label, op] = pick(ops, rng);
  double v = op(lit.value);
  if (lit.site == Site::exponent) v = std::clamp(std::round(v), 1.0, 3.0);
  // A divisor literal only grows, so a guard like max(1, x) stays positive.
  if (lit.site == Site::divisor && !(v >= 1.0 && v >= lit.value)) v = lit.value * 2 + (lit.value == 0 ? 1 : 0);
  if (v == lit.value) return std::nullopt;
  return Edit{to_source(replace_literal(ast, target, v)), "coefficient " + fmt(lit.value) + " " + label + " -> " + fmt(v)};
}

std::optional<Edit> threshold(const SkillAst& ast, std::mt19937_64& rng) {
  std::vector<std::size_t> sites;
  const auto lits = literals(ast);
  for (std::size_t i = 0; i < lits.size(); ++i) {
    if (lits[i].site == Site::compare) sites.push_back(i);
  }
  if (sites.empty()) return std::nullopt;
  const std::size_t target = pick(sites, rng);
  const double old = lits[target].value;
  const double v = std::max(0.0, old + pick(std::vector<double>{-2.0, -1.0, 1.0, 2.0}, rng));
  if (v == old) return std::nullopt;
  return Edit{to_source(replace_literal(ast, target, v)), "threshold " + fmt(old) + " -> " + fmt(v)};
}

std::optional<Edit> wrap_if(const SkillAst& ast, bool inlane, std::mt19937_64& rng) {
  if (complexity(ast).branch_depth >= 3) return std::nullopt;
  const std::string var = inlane ? "num_waiting_vehicle" : "num_vehicle";
  const double theta = pick(kThreshold, rng);
  const double k = pick(kScale, rng);
  const std::string body = to_source(ast);
  std::string code = "if " + var + " > " + fmt(theta) + ":\n" + indent(body) + "\n    value[0] *= " + fmt(k) +
                     "\nelse:\n" + indent(body);
  return Edit{code, "scaled the score by " + fmt(k) + " when " + var + " > " + fmt(theta)};
}

Edit term(const SkillAst& ast, bool inlane, bool events, std::mt19937_64& rng) {
  const auto vars = readable(inlane, events);
  const std::string& v = pick(vars, rng);
  double c = pick(kSmall, rng);
  if (chance(inlane ? 0.3 : 0.6, rng)) c = -c;
  const std::string op = c < 0 ? " -= " : " += ";
  std::string expr;
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: expr = v + " * " + fmt(std::fabs(c)); break;
    case 1: expr = "min(" + fmt(pick(kThreshold, rng) + 1) + ", " + v + ") * " + fmt(std::fabs(c)); break;
    default: {
      const std::string& w = pick(vars, rng);
      expr = v + " * " + fmt(std::fabs(c)) + " / max(1, " + w + ")";
    }
  }
  return {to_source(ast) + "\nvalue[0]" + op + expr, "added the term " + std::string(c < 0 ? "-" : "+") + expr};
}

Mutation choose(bool force_innovation, const MutatorConfig& cfg, std::mt19937_64& rng) {
  if (force_innovation) {
    if (chance(cfg.innovation_rewrite, rng)) return Mutation::rewrite;
    std::discrete_distribution<int> d(cfg.weights.begin(), cfg.weights.end() - 1);
    return static_cast<Mutation>(d(rng));
  }
  std::discrete_distribution<int> d(cfg.weights.begin(), cfg.weights.end());
  return static_cast<Mutation>(d(rng));
}

}  // namespace

MutationResult scripted_mutate(const Skill& elite, bool force_innovation, std::mt19937_64& rng, bool event_variables,
                               const MutatorConfig& config, std::optional<events::EventKind> event_kind) {
  const auto whitelist = event_variables ? VariableWhitelist::with_events() : VariableWhitelist::lane();
  const bool inlane = chance(0.7, rng);
  Mutation m = choose(force_innovation, config, rng);
  const std::string& source = inlane ? elite.inlane_code : elite.outlane_code;

  std::optional<Edit> edit;
  SkillAst ast;
  bool parsed = true;
  try {
    ast = parse(source);
  } catch (const SyntaxError&) {
    parsed = false;
  }
  if (!parsed) m = Mutation::rewrite;
  switch (m) {
    case Mutation::coefficient: edit = coefficient(ast, rng); break;
    case Mutation::threshold:
      edit = threshold(ast, rng);
      if (!edit) {
        m = Mutation::wrap_if;
        edit = wrap_if(ast, inlane, rng);
      }
      break;
    case Mutation::wrap_if: edit = wrap_if(ast, inlane, rng); break;
    case Mutation::term: edit = term(ast, inlane, event_variables, rng); break;
    case Mutation::rewrite: break;
  }
  if (!edit) {
    if (m != Mutation::rewrite) {
      m = Mutation::term;
      edit = term(ast, inlane, event_variables, rng);
    } else {
      edit = rewrite(inlane, event_kind, rng);
    }
  }

  MutationResult out;
  out.applied = m;
  Skill& d = out.draft;
  d.inlane_code = inlane ? edit->code : elite.inlane_code;
  d.outlane_code = inlane ? elite.outlane_code : edit->code;
  d.description = elite.description.empty() ? "Scripted variant." : elite.description;
  d.guidance = std::string(mutation_name(m)) + " on " + (inlane ? "inlane" : "outlane") + ": " + edit->note + ".";
  if (!sandbox_check(d, whitelist).ok) {
    // Unreachable for well-formed elites; keep the contract regardless.
    d.inlane_code = "value[0] += num_waiting_vehicle";
    d.outlane_code = "value[0] += 0";
    d.guidance = "rewrite fallback to the queue-count rule.";
    out.applied = Mutation::rewrite;
  }
  return out;
}

std::string ScriptedBackend::complete(const DraftRequest& request) {
  auto result = scripted_mutate(request.elite, request.force_innovation, rng_, request.event_variables, config_,
                                request.event_kind);
  const auto& d = result.draft;
  return json{{"description", d.description},
              {"guidance", d.guidance},
              {"inlane_code", d.inlane_code},
              {"outlane_code", d.outlane_code},
              {"mutation", mutation_name(result.applied)}}
      .dump();
}

json ScriptedBackend::state() const {
  std::ostringstream ss;
  ss << rng_;
  return json{{"rng", ss.str()}};
}

void ScriptedBackend::restore(const json& state) {
  std::istringstream ss(state.at("rng").get<std::string>());
  ss >> rng_;
  if (!ss) throw StorageError("cannot restore generator state");
}

GenerateResult generate(Backend& backend, const DraftRequest& request, int count, const VariableWhitelist& whitelist,
                        int max_retries, const AuditSink& audit) {
  GenerateResult out;
  for (int i = 0; i < count; ++i) {
    DraftRequest req = request;
    bool accepted = false;
    for (int attempt = 0; attempt <= max_retries && !accepted; ++attempt) {
      ++out.calls;
      if (attempt > 0) ++out.retries;
      std::string stage = "format";
      std::string problem;
      std::optional<std::string> reply;
      try {
        reply = backend.complete(req);
      } catch (const InvalidDraft& e) {
        problem = e.what();
      }
      if (audit) audit("generated", json{{"draft", i}, {"attempt", attempt}, {"backend", backend.name()}});
      if (reply) {
        try {
          Skill draft = parse_draft(*reply);
          const auto report = sandbox_check(draft, whitelist);
          if (report.ok) {
            if (audit) audit("validated", json{{"draft", i}, {"attempt", attempt}});
            out.drafts.push_back(std::move(draft));
            accepted = true;
            continue;
          }
          stage = std::string(stage_name(report.stage));
          problem = report.message;
        } catch (const InvalidDraft& e) {
          problem = e.what();
        }
      }
      if (audit) audit("rejected", json{{"draft", i}, {"attempt", attempt}, {"stage", stage}, {"message", problem}});
      req.prompts.user = request.prompts.user + "\n\nYour previous reply was rejected (" + stage + "): " + problem +
                         "\nReturn a corrected JSON object.";
    }
    if (!accepted) ++out.dropped;
  }
  return out;
}

}  // namespace tsevo::gen
