#include "tsevo/sim/network.hpp"

#include "tsevo/error.hpp"

namespace tsevo::sim {

namespace {

constexpr std::array<int, 4> kDr = {-1, 0, 1, 0};
constexpr std::array<int, 4> kDc = {0, 1, 0, -1};

}  // namespace

std::string_view heading_name(Heading h) {
  switch (h) {
    case Heading::north: return "north";
    case Heading::east: return "east";
    case Heading::south: return "south";
    case Heading::west: return "west";
  }
  return "?";
}

Network build_network(int rows, int cols, double link_length, double free_speed) {
  if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be positive");
  if (!(link_length > 0.0)) throw ConfigError("link length must be positive");
  Network net;
  net.rows = rows;
  net.cols = cols;
  net.link_length = link_length;
  net.intersections.resize(static_cast<std::size_t>(rows * cols));
  auto inside = [&](int r, int c) { return r >= 0 && r < rows && c >= 0 && c < cols; };
  auto add_link = [&](int from, int to, int h) {
    Link link;
    link.id = static_cast<int>(net.links.size());
    link.from = from;
    link.to = to;
    link.heading = static_cast<Heading>(h);
    link.length = link_length;
    link.free_speed = free_speed;
    net.links.push_back(link);
    return link.id;
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& node = net.intersections[static_cast<std::size_t>(net.intersection_at(r, c))];
      node.id = net.intersection_at(r, c);
      node.row = r;
      node.col = c;
    }
  }
  for (auto& node : net.intersections) {
    for (int h = 0; h < 4; ++h) {
      const int r = node.row + kDr[static_cast<std::size_t>(h)];
      const int c = node.col + kDc[static_cast<std::size_t>(h)];
      const int to = inside(r, c) ? net.intersection_at(r, c) : kNoNode;
      node.out_links[static_cast<std::size_t>(h)] = add_link(node.id, to, h);
      if (to == kNoNode) net.exit_links.push_back(node.out_links[static_cast<std::size_t>(h)]);
    }
  }
  for (auto& node : net.intersections) {
    for (int h = 0; h < 4; ++h) {
      const int r = node.row - kDr[static_cast<std::size_t>(h)];
      const int c = node.col - kDc[static_cast<std::size_t>(h)];
      int in;
      if (inside(r, c)) {
        in = net.intersections[static_cast<std::size_t>(net.intersection_at(r, c))].out_links[static_cast<std::size_t>(h)];
      } else {
        in = add_link(kNoNode, node.id, h);
        net.entry_links.push_back(in);
      }
      node.in_links[static_cast<std::size_t>(h)] = in;
    }
  }
  for (auto& node : net.intersections) {
    for (int h = 0; h < 4; ++h) {
      const auto heading = static_cast<Heading>(h);
      for (int lane = 0; lane < kLanesPerLink; ++lane) {
        const Heading exit = lane == 0 ? heading : left_of(heading);
        const int phase = phase_of(heading, lane);
        const int slot = (heading == Heading::north || heading == Heading::east) ? 0 : 1;
        node.phases[static_cast<std::size_t>(phase)][static_cast<std::size_t>(slot)] =
            LaneLink{node.in_links[static_cast<std::size_t>(h)], lane, node.out_links[static_cast<std::size_t>(exit)]};
      }
    }
  }
  return net;
}

namespace {

void continue_straight(const Network& net, int node, Heading h, std::vector<int>& route) {
  while (node != kNoNode) {
    const int link = net.intersections[static_cast<std::size_t>(node)].out_links[static_cast<std::size_t>(h)];
    route.push_back(link);
    node = net.links[static_cast<std::size_t>(link)].to;
  }
}

}  // namespace

std::vector<int> straight_route(const Network& net, int entry_link) {
  const auto& entry = net.links[static_cast<std::size_t>(entry_link)];
  std::vector<int> route{entry_link};
  continue_straight(net, entry.to, entry.heading, route);
  return route;
}

std::vector<std::vector<int>> single_turn_routes(const Network& net, int entry_link) {
  const auto straight = straight_route(net, entry_link);
  const Heading h = net.links[static_cast<std::size_t>(entry_link)].heading;
  std::vector<std::vector<int>> routes;
  // straight[k] is the link entering the k-th intersection on the path.
  for (std::size_t k = 0; k + 1 < straight.size(); ++k) {
    const int node = net.links[static_cast<std::size_t>(straight[k])].to;
    for (Heading turn : {left_of(h), right_of(h)}) {
      std::vector<int> route(straight.begin(), straight.begin() + static_cast<std::ptrdiff_t>(k) + 1);
      continue_straight(net, node, turn, route);
      routes.push_back(std::move(route));
    }
  }
  return routes;
}

}  // namespace tsevo::sim
