#include "common.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "tsevo/dsl/validate.hpp"
#include "tsevo/events/events.hpp"
#include "tsevo/metrics/metrics.hpp"
#include "tsevo/util/parallel.hpp"

namespace tsevo::cli {

Skill load_skill(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read skill file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    auto j = nlohmann::json::parse(ss.str());
    // Capsule files wrap the skill.
    if (j.contains("skill") && j["skill"].is_object()) j = j["skill"];
    if (!j.contains("id")) j["id"] = path.stem().string();
    return j.get<Skill>();
  } catch (const nlohmann::json::exception& e) {
    throw dsl::InvalidSkill({false, dsl::Stage::parse, path.string() + ": " + e.what()});
  }
}

control::ControllerSpec method_spec(const std::string& method) {
  if (method == "dispatcher") return control::ControllerSpec::for_bank(events::default_bank());
  for (const std::string prefix : {"skill:", "skill+events:"}) {
    if (method.rfind(prefix, 0) == 0) {
      const auto skill = load_skill(method.substr(prefix.size()));
      const bool events = prefix == "skill+events:";
      const auto report = dsl::sandbox_check(
          skill, events ? dsl::VariableWhitelist::with_events() : dsl::VariableWhitelist::lane());
      if (!report.ok) throw dsl::InvalidSkill(report);
      return control::ControllerSpec::for_skill(skill, events);
    }
  }
  auto kind = control::parse_controller_kind(method);
  if (!kind || *kind == control::ControllerKind::skill || *kind == control::ControllerKind::dispatcher) {
    throw UsageError("unknown method '" + method +
                     "' (fixed_time, max_pressure, handcrafted_preemption, dispatcher, skill:<file>)");
  }
  return control::ControllerSpec::baseline(*kind);
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& raw) {
  std::vector<std::uint64_t> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      const auto dash = part.find('-', 1);
      try {
        if (dash == std::string::npos) {
          out.push_back(std::stoull(part));
        } else {
          const auto lo = std::stoull(part.substr(0, dash));
          const auto hi = std::stoull(part.substr(dash + 1));
          if (hi < lo) throw UsageError("empty seed range " + part);
          for (auto s = lo; s <= hi; ++s) out.push_back(s);
        }
      } catch (const std::logic_error&) {
        throw UsageError("invalid seed '" + part + "'");
      }
    }
  }
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

const std::vector<MetricColumn>& metric_columns() {
  static const std::vector<MetricColumn> cols = {
      {"avg_delay", [](const sim::SimulationMetrics& m) -> std::optional<double> { return m.avg_delay; }},
      {"avg_queue", [](const sim::SimulationMetrics& m) -> std::optional<double> { return m.avg_queue; }},
      {"throughput", [](const sim::SimulationMetrics& m) -> std::optional<double> { return m.throughput; }},
      {"emergency_delay", [](const sim::SimulationMetrics& m) { return m.emergency_delay; }},
      {"bus_person_delay", [](const sim::SimulationMetrics& m) { return m.bus_person_delay; }},
      {"incident_delay", [](const sim::SimulationMetrics& m) { return m.incident_delay; }},
  };
  return cols;
}

std::vector<sim::SimulationMetrics> run_seeds(const control::ControllerSpec& spec, const sim::ScenarioConfig& scenario,
                                              const std::vector<std::uint64_t>& seeds, int jobs) {
  std::vector<sim::SimulationMetrics> out(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) { out[i] = control::drive(spec, scenario, seeds[i]).metrics; });
  return out;
}

std::string csv_number(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

void write_metric_table(std::ostream& out, const std::string& label, const std::vector<std::uint64_t>& seeds,
                        const std::vector<sim::SimulationMetrics>& runs) {
  out << "method,seed";
  for (const auto& c : metric_columns()) out << ',' << c.name;
  out << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out << label << ',' << seeds[i];
    for (const auto& c : metric_columns()) {
      out << ',';
      if (auto v = c.get(runs[i])) out << csv_number(*v);
    }
    out << '\n';
  }
  for (const char* stat : {"mean", "std"}) {
    out << label << ',' << stat;
    for (const auto& c : metric_columns()) {
      std::vector<double> xs;
      for (const auto& r : runs) {
        if (auto v = c.get(r)) xs.push_back(*v);
      }
      out << ',';
      if (xs.empty()) continue;
      const auto ms = metrics::mean_std(xs);
      out << csv_number(std::string_view(stat) == "mean" ? ms.mean : ms.std);
    }
    out << '\n';
  }
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const std::vector<std::string>& argv,
                    nlohmann::json inputs) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
  nlohmann::json j{{"tool", "tsevo"}, {"version", TSEVO_VERSION}, {"command", command}, {"argv", argv},
                   {"inputs", std::move(inputs)}};
  std::ofstream out(dir.empty() ? std::filesystem::path("manifest.json") : dir / "manifest.json");
  out << j.dump(2) << '\n';
}

Output::Output(const std::string& path) {
  if (path.empty() || path == "-") return;
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  file_.emplace(p);
  if (!*file_) throw UsageError("cannot write " + path);
}

std::ostream& Output::stream() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }

}  // namespace tsevo::cli
