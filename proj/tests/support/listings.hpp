#pragma once

#include <string>
#include <vector>

#include "tsevo/skill.hpp"

// Reference skill listings used as interpreter test vectors.
namespace listings {

inline tsevo::Skill make(std::string id, std::string inlane, std::string outlane) {
  tsevo::Skill s;
  s.id = std::move(id);
  s.inlane_code = std::move(inlane);
  s.outlane_code = std::move(outlane);
  return s;
}

// Full representation with lane-indexed aliases and continuation lines.
inline tsevo::Skill gen19_full() {
  return make("t1-gen19-full",
              "if inlane_2_num_waiting_vehicle > 5:\n"
              "    value[0] += inlane_2_num_waiting_vehicle * (max(1,\n"
              "        inlane_2_vehicle_dist) - inlane_2_vehicle_dist % 3)\n"
              "        + inlane_2_num_vehicle // 4\n"
              "elif inlane_2_num_waiting_vehicle > 0:\n"
              "    value[0] += inlane_2_num_waiting_vehicle * 2\n",
              "value[0] += min(10, outlane_2_num_vehicle)\n"
              "    * max(0, outlane_2_vehicle_dist - 3)\n");
}

inline tsevo::Skill t1_gen19() {
  return make("t1-gen19",
              "if waiting > 5: value[0] += waiting * (max(1, dist)\n"
              "    - dist % 3) + vehicles // 4\n"
              "elif waiting > 0: value[0] += waiting * 2\n",
              "value[0] += min(10, vehicles) * max(0, dist - 3)");
}

inline tsevo::Skill t2_gen59() {
  return make("t2-gen59", "value[0] += waiting * max(1, dist) + vehicles // 5", "value[0] += 0");
}

inline tsevo::Skill t3_gen79() {
  return make("t3-gen79",
              "if waiting > vehicles // 3:\n"
              "    value[0] += (waiting - vehicles // 3) ** 2\n",
              "value[0] += 0");
}

inline tsevo::Skill emergency() {
  return make("emergency",
              "if emergency_distance > 0:\n"
              "    if emergency_phase == index:\n"
              "        value[0] += max(0, 200 - emergency_distance) * 10\n"
              "    else:\n"
              "        value[0] += waiting * 2\n"
              "else:\n"
              "    value[0] += waiting * 3\n",
              "value[0] -= num_vehicle * 0.3");
}

inline tsevo::Skill transit() {
  return make("transit",
              "value[0] += waiting * 4\n"
              "    + vehicles / max(1, dist)\n",
              "value[0] -= (vehicles\n"
              "    / max(1, dist)) * 2\n");
}

inline tsevo::Skill incident() {
  return make("incident",
              "if incident_blocked > 0:\n"
              "    value[0] += max(0, vehicles - waiting) * 5\n"
              "else:\n"
              "    value[0] += waiting * 3\n",
              "value[0] -= vehicles * 0.5");
}

inline tsevo::Skill congestion() {
  return make("congestion",
              "value[0] += waiting ** 2\n"
              "if congestion_level > 1:\n"
              "    value[0] += waiting * congestion_level * 2\n",
              "value[0] += dist * 0.5");
}

// The five reference listings: routine (T1 gen 19) and the four events.
inline std::vector<tsevo::Skill> five_listings() {
  return {t1_gen19(), emergency(), transit(), incident(), congestion()};
}

inline std::vector<tsevo::Skill> all() {
  return {gen19_full(), t1_gen19(), t2_gen59(), t3_gen79(), emergency(), transit(), incident(), congestion()};
}

}  // namespace listings
