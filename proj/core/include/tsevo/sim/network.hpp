#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tsevo::sim {

// Direction of travel. Row indices grow southwards, columns eastwards.
enum class Heading : std::uint8_t { north, east, south, west };

inline constexpr int kPhaseCount = 4;
inline constexpr int kLanesPerLink = 2;

constexpr Heading left_of(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
constexpr Heading right_of(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }
constexpr bool is_north_south(Heading h) { return h == Heading::north || h == Heading::south; }
std::string_view heading_name(Heading h);

// Lane 0 carries through and right-turn movements, lane 1 left turns.
// P0 north-south through, P1 north-south left, P2 east-west through,
// P3 east-west left.
constexpr int phase_of(Heading approach, int lane) { return (is_north_south(approach) ? 0 : 2) + lane; }

inline constexpr int kNoNode = -1;

struct Link {
  int id = 0;
  int from = kNoNode;  // upstream intersection, kNoNode for a boundary source
  int to = kNoNode;    // downstream intersection, kNoNode for a boundary sink
  Heading heading = Heading::north;
  double length = 300.0;
  int lanes = kLanesPerLink;
  double free_speed = 13.9;
  bool is_entry() const { return from == kNoNode; }
  bool is_exit() const { return to == kNoNode; }
};

// An incoming lane and the link its movement discharges into.
struct LaneLink {
  int in_link = 0;
  int lane = 0;
  int out_link = 0;
};

struct Intersection {
  int id = 0;
  int row = 0;
  int col = 0;
  std::array<int, 4> in_links{};   // indexed by heading of travel
  std::array<int, 4> out_links{};  // indexed by heading of travel
  std::array<std::array<LaneLink, 2>, kPhaseCount> phases{};
};

struct Network {
  int rows = 0;
  int cols = 0;
  double link_length = 0.0;
  std::vector<Intersection> intersections;
  std::vector<Link> links;
  std::vector<int> entry_links;
  std::vector<int> exit_links;

  int intersection_at(int row, int col) const { return row * cols + col; }
  // Two-way road segments; each contributes two directed links.
  int segment_count() const { return static_cast<int>(links.size()) / 2; }
};

// Grid of rows x cols signalized intersections, each with four approaches;
// perimeter approaches are fed by boundary sources and drain into sinks.
// Throws ConfigError on nonpositive dimensions.
Network build_network(int rows, int cols, double link_length, double free_speed = 13.9);

// Link sequence from an entry link straight across the grid to a sink.
std::vector<int> straight_route(const Network& net, int entry_link);

// All routes from an entry link that turn exactly once (left or right at
// one intersection along the straight path).
std::vector<std::vector<int>> single_turn_routes(const Network& net, int entry_link);

}  // namespace tsevo::sim
