#include "tsevo/skill.hpp"

#include <cmath>
#include <limits>

#include "tsevo/error.hpp"

namespace tsevo {

nlohmann::json fitness_to_json(double fitness) {
  if (std::isnan(fitness)) return "nan";
  if (std::isinf(fitness)) return fitness > 0 ? "inf" : "-inf";
  return fitness;
}

double fitness_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw StorageError("invalid fitness value: " + j.dump());
}

void to_json(nlohmann::json& j, const Skill& skill) {
  j = nlohmann::json{
      {"id", skill.id},
      {"parent_id", skill.parent_id ? nlohmann::json(*skill.parent_id) : nlohmann::json()},
      {"generation", skill.generation},
      {"description", skill.description},
      {"guidance", skill.guidance},
      {"inlane_code", skill.inlane_code},
      {"outlane_code", skill.outlane_code},
      {"fitness", skill.fitness ? fitness_to_json(*skill.fitness) : nlohmann::json()},
      {"metrics_snapshot", skill.metrics_snapshot},
  };
}

void from_json(const nlohmann::json& j, Skill& skill) {
  skill.id = j.at("id").get<std::string>();
  skill.parent_id.reset();
  if (j.contains("parent_id") && !j["parent_id"].is_null()) skill.parent_id = j["parent_id"].get<std::string>();
  skill.generation = j.value("generation", 0);
  skill.description = j.value("description", "");
  skill.guidance = j.value("guidance", "");
  skill.inlane_code = j.at("inlane_code").get<std::string>();
  skill.outlane_code = j.at("outlane_code").get<std::string>();
  skill.fitness.reset();
  if (j.contains("fitness") && !j["fitness"].is_null()) skill.fitness = fitness_from_json(j["fitness"]);
  skill.metrics_snapshot = j.value("metrics_snapshot", nlohmann::json());
}

Skill seed_skill() {
  Skill s;
  s.id = "seed";
  s.generation = 0;
  s.description = "Accumulate waiting vehicle counts on incoming lanes.";
  s.guidance = "Baseline scorer; favours the phase with the most queued vehicles.";
  s.inlane_code = "value[0] += num_waiting_vehicle";
  s.outlane_code = "value[0] += 0";
  return s;
}

}  // namespace tsevo
