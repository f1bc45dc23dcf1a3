#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace tsevo {

// An evolved control artifact: rationale, selection guidance and the two
// scoring bodies, plus lineage and the fitness it earned.
struct Skill {
  std::string id;
  std::optional<std::string> parent_id;
  int generation = 0;
  std::string description;
  std::string guidance;
  std::string inlane_code;
  std::string outlane_code;
  std::optional<double> fitness;
  nlohmann::json metrics_snapshot;  // null when absent
};

void to_json(nlohmann::json& j, const Skill& skill);
void from_json(const nlohmann::json& j, Skill& skill);

// Non-finite fitness values are written as the strings "-inf"/"inf".
nlohmann::json fitness_to_json(double fitness);
double fitness_from_json(const nlohmann::json& j);

// The minimal seed: accumulate waiting vehicles on the inlane.
Skill seed_skill();

}  // namespace tsevo
