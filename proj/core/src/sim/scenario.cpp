#include "tsevo/sim/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <map>

#include "tsevo/error.hpp"

namespace tsevo::sim {

namespace {

struct Family {
  std::string base;  // demand family for V/E/B/I/M scenarios
  double perturbation = 0.0;
  std::vector<EventInjection> events;
};

// Demand segments with start expressed as a fraction of the duration.
std::vector<DemandSegment> base_demand(const std::string& t, double duration) {
  std::vector<DemandSegment> fractional;
  if (t == "T1") {
    fractional = {{0.0, 0.05, 0.05}};
  } else if (t == "T2") {
    fractional = {{0.0, 0.075, 0.03}};
  } else {
    fractional = {{0.0, 0.035, 0.035}, {1.0 / 3.0, 0.035, 0.08}, {2.0 / 3.0, 0.035, 0.035}};
  }
  for (auto& seg : fractional) seg.start = std::round(seg.start * duration);
  return fractional;
}

const std::map<std::string, Family>& families() {
  static const std::map<std::string, Family> table = {
      {"T1", {"T1", 0.0, {}}},
      {"T2", {"T2", 0.0, {}}},
      {"T3", {"T3", 0.0, {}}},
      {"V1", {"T1", 0.15, {}}},
      {"V2", {"T2", 0.15, {}}},
      {"V3", {"T3", 0.15, {}}},
      {"E1", {"T1", 0.0, {{InjectionKind::emergency, 300.0, 0, 0.0, 0.0}}}},
      {"E2", {"T1", 0.0, {{InjectionKind::emergency, 120.0, 0, 0.0, 0.0}}}},
      {"B1", {"T1", 0.0, {{InjectionKind::transit, 180.0, 2, 0.0, 0.0}}}},
      {"B2", {"T1", 0.0, {{InjectionKind::transit, 120.0, 4, 0.0, 0.0}}}},
      {"I1", {"T1", 0.0, {{InjectionKind::incident, 0.0, 0, 600.0, 300.0}}}},
      {"M1",
       {"T1",
        0.0,
        {{InjectionKind::emergency, 300.0, 0, 0.0, 0.0}, {InjectionKind::incident, 0.0, 0, 600.0, 300.0}}}},
  };
  return table;
}

InjectionKind parse_kind(const std::string& s) {
  if (s == "emergency") return InjectionKind::emergency;
  if (s == "transit" || s == "bus") return InjectionKind::transit;
  if (s == "incident") return InjectionKind::incident;
  throw ConfigError("unknown event kind '" + s + "'");
}

std::uint64_t family_perturbation_seed(const std::string& name) {
  // Fixed per family so V-scenarios share one perturbation across runs.
  std::uint64_t h = 1469598103934665603ull;
  for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  return h;
}

}  // namespace

std::string_view injection_name(InjectionKind kind) {
  switch (kind) {
    case InjectionKind::emergency: return "emergency";
    case InjectionKind::transit: return "transit";
    case InjectionKind::incident: return "incident";
  }
  return "?";
}

bool ScenarioConfig::has(InjectionKind kind) const { return find(kind) != nullptr; }

const EventInjection* ScenarioConfig::find(InjectionKind kind) const {
  for (const auto& e : events) {
    if (e.kind == kind) return &e;
  }
  return nullptr;
}

ScenarioOverrides desk_scale() {
  ScenarioOverrides o;
  o.rows = 2;
  o.cols = 2;
  o.duration = 900.0;
  return o;
}

std::vector<std::string> scenario_families() {
  std::vector<std::string> out;
  for (const auto& [name, f] : families()) out.push_back(name);
  return out;
}

ScenarioConfig make_scenario(const std::string& family, const ScenarioOverrides& overrides) {
  const auto it = families().find(family);
  if (it == families().end()) throw ConfigError("unknown scenario family '" + family + "'");
  ScenarioConfig cfg;
  cfg.name = family;
  if (overrides.rows) cfg.network.rows = *overrides.rows;
  if (overrides.cols) cfg.network.cols = *overrides.cols;
  if (overrides.link_length) cfg.network.link_length = *overrides.link_length;
  if (overrides.duration) cfg.duration = *overrides.duration;
  if (overrides.seed) cfg.seed = *overrides.seed;
  cfg.demand = base_demand(it->second.base, cfg.duration);
  cfg.perturbation = it->second.perturbation;
  cfg.perturbation_seed = family_perturbation_seed(family);
  cfg.events = it->second.events;
  check_scenario(cfg);
  return cfg;
}

void check_scenario(const ScenarioConfig& c) {
  if (c.network.rows < 1 || c.network.cols < 1) throw ConfigError("grid dimensions must be positive");
  if (!(c.network.link_length > 0)) throw ConfigError("link length must be positive");
  if (!(c.duration > 0)) throw ConfigError("duration must be positive");
  if (c.step != 1.0) throw ConfigError("only a 1 s step is supported");
  if (c.perturbation < 0 || c.perturbation >= 1) throw ConfigError("perturbation must be in [0, 1)");
  double last = -1;
  for (const auto& seg : c.demand) {
    if (seg.start < 0 || seg.start >= c.duration) throw ConfigError("demand segment starts outside the duration");
    if (seg.start <= last) throw ConfigError("demand segments must have increasing starts");
    if (seg.rate_ns < 0 || seg.rate_ew < 0) throw ConfigError("demand rates must be nonnegative");
    last = seg.start;
  }
  for (const auto& e : c.events) {
    switch (e.kind) {
      case InjectionKind::emergency:
        if (!(e.interval > 0)) throw ConfigError("emergency interval must be positive");
        break;
      case InjectionKind::transit:
        if (!(e.interval > 0) || e.lines < 1) throw ConfigError("transit needs lines >= 1 and a positive headway");
        break;
      case InjectionKind::incident:
        if (e.start < 0 || !(e.duration > 0) || e.start + e.duration > c.duration) {
          throw ConfigError("incident window must fit within the duration");
        }
        break;
    }
  }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot read scenario file " + path.string() + ": " + e.what());
  }
  try {
    ScenarioOverrides o;
    if (auto grid = root["grid"]) {
      if (grid["rows"]) o.rows = grid["rows"].as<int>();
      if (grid["cols"]) o.cols = grid["cols"].as<int>();
      if (grid["link_length"]) o.link_length = grid["link_length"].as<double>();
    }
    if (root["duration"]) o.duration = root["duration"].as<double>();
    if (root["seed"]) o.seed = root["seed"].as<std::uint64_t>();
    ScenarioConfig cfg = make_scenario(root["family"] ? root["family"].as<std::string>() : "T1", o);
    if (!root["family"]) {
      cfg.name = "custom";
      cfg.events.clear();
    }
    if (root["name"]) cfg.name = root["name"].as<std::string>();
    if (auto demand = root["demand"]) {
      cfg.demand.clear();
      for (const auto& seg : demand) {
        cfg.demand.push_back({seg["start"].as<double>(0.0), seg["ns"].as<double>(), seg["ew"].as<double>()});
      }
    }
    if (root["perturbation"]) cfg.perturbation = root["perturbation"].as<double>();
    if (root["perturbation_seed"]) cfg.perturbation_seed = root["perturbation_seed"].as<std::uint64_t>();
    if (auto events = root["events"]) {
      cfg.events.clear();
      for (const auto& e : events) {
        EventInjection inj;
        inj.kind = parse_kind(e["kind"].as<std::string>());
        inj.interval = e["interval"].as<double>(inj.interval);
        inj.lines = e["lines"].as<int>(0);
        inj.start = e["start"].as<double>(0.0);
        inj.duration = e["duration"].as<double>(0.0);
        cfg.events.push_back(inj);
      }
    }
    check_scenario(cfg);
    return cfg;
  } catch (const YAML::Exception& e) {
    throw ConfigError("invalid scenario file " + path.string() + ": " + e.what());
  }
}

ScenarioConfig resolve_scenario(const std::string& spec) {
  if (auto at = spec.find('@'); at != std::string::npos) {
    if (spec.substr(at + 1) != "desk") throw ConfigError("unknown scale in '" + spec + "'");
    auto cfg = make_scenario(spec.substr(0, at), desk_scale());
    cfg.name = spec;
    return cfg;
  }
  if (families().contains(spec)) return make_scenario(spec);
  if (std::filesystem::exists(spec)) return load_scenario(spec);
  throw ConfigError("unknown scenario '" + spec + "'");
}

int scheduled_emergencies(const ScenarioConfig& c) {
  int n = 0;
  for (const auto& e : c.events) {
    if (e.kind != InjectionKind::emergency) continue;
    for (int k = 0; k * e.interval + e.interval / 2 < c.duration; ++k) ++n;
  }
  return n;
}

int scheduled_buses(const ScenarioConfig& c) {
  int n = 0;
  for (const auto& e : c.events) {
    if (e.kind != InjectionKind::transit) continue;
    for (int k = 0; k * e.interval + e.interval / 2 < c.duration; ++k) n += e.lines;
  }
  return n;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"name", c.name},
                     {"grid", {{"rows", c.network.rows}, {"cols", c.network.cols}, {"link_length", c.network.link_length}}},
                     {"duration", c.duration},
                     {"perturbation", c.perturbation},
                     {"perturbation_seed", c.perturbation_seed},
                     {"seed", c.seed}};
  auto& demand = j["demand"] = nlohmann::json::array();
  for (const auto& s : c.demand) demand.push_back({{"start", s.start}, {"ns", s.rate_ns}, {"ew", s.rate_ew}});
  auto& events = j["events"] = nlohmann::json::array();
  for (const auto& e : c.events) {
    nlohmann::json ej{{"kind", injection_name(e.kind)}};
    if (e.kind == InjectionKind::incident) {
      ej["start"] = e.start;
      ej["duration"] = e.duration;
    } else {
      ej["interval"] = e.interval;
    }
    if (e.kind == InjectionKind::transit) ej["lines"] = e.lines;
    events.push_back(ej);
  }
}

}  // namespace tsevo::sim
