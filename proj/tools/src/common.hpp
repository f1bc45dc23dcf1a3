#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsevo/control/control.hpp"
#include "tsevo/sim/simulation.hpp"
#include "tsevo/skill.hpp"

namespace tsevo::cli {

// Thrown for bad flags; main() prints it and exits with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reads a skill JSON file. Malformed JSON or missing fields raise
// dsl::InvalidSkill at the parse stage.
Skill load_skill(const std::filesystem::path& path);

// A baseline name, "dispatcher" (default bank), or "skill:<file>" /
// "skill+events:<file>".
control::ControllerSpec method_spec(const std::string& method);

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& raw);

// Metric columns shared by evaluate, baseline and compare.
struct MetricColumn {
  std::string name;
  std::optional<double> (*get)(const sim::SimulationMetrics&);
};
const std::vector<MetricColumn>& metric_columns();

// One episode per seed, run on up to `jobs` threads; results in seed order.
std::vector<sim::SimulationMetrics> run_seeds(const control::ControllerSpec& spec, const sim::ScenarioConfig& scenario,
                                              const std::vector<std::uint64_t>& seeds, int jobs);

void write_metric_table(std::ostream& out, const std::string& label, const std::vector<std::uint64_t>& seeds,
                        const std::vector<sim::SimulationMetrics>& runs);

std::string csv_number(double v);

// manifest.json beside the command's outputs.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const std::vector<std::string>& argv,
                    nlohmann::json inputs);

// Opens `path` for writing, or returns stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path);
  std::ostream& stream();
  bool is_file() const { return file_.has_value(); }

 private:
  std::optional<std::ofstream> file_;
};

}  // namespace tsevo::cli
