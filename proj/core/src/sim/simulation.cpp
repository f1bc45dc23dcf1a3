#include "tsevo/sim/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "tsevo/dsl/whitelist.hpp"
#include "tsevo/error.hpp"

namespace tsevo::sim {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

}  // namespace

std::string_view class_name(VehicleClass c) {
  switch (c) {
    case VehicleClass::normal: return "normal";
    case VehicleClass::emergency: return "emergency";
    case VehicleClass::bus: return "bus";
  }
  return "?";
}

double occupancy(VehicleClass c) { return c == VehicleClass::bus ? 30.0 : 1.5; }

Simulation::Simulation(ScenarioConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      net_(build_network(config_.network.rows, config_.network.cols, config_.network.link_length,
                         config_.traffic.free_speed)),
      rng_(seed) {
  check_scenario(config_);
  signals_.resize(net_.intersections.size());
  lanes_.resize(net_.links.size() * kLanesPerLink);
  for (const auto& link : net_.links) {
    for (int l = 0; l < kLanesPerLink; ++l) lane_ref(link.id, l).stop = link.length;
  }
  const std::size_t sources = net_.entry_links.size();
  backlog_.resize(sources);
  source_multiplier_.assign(sources, 1.0);
  if (config_.perturbation > 0) {
    std::mt19937_64 prng(config_.perturbation_seed);
    std::uniform_real_distribution<double> u(1.0 - config_.perturbation, 1.0 + config_.perturbation);
    for (auto& m : source_multiplier_) m = u(prng);
  }
  for (int e : net_.entry_links) {
    straight_routes_.push_back(straight_route(net_, e));
    turn_routes_.push_back(single_turn_routes(net_, e));
  }

  const int rows = net_.rows;
  const int cols = net_.cols;
  auto entry_into = [&](int r, int c, Heading h) {
    return net_.intersections[idx(net_.intersection_at(r, c))].in_links[static_cast<std::size_t>(h)];
  };
  for (const auto& inj : config_.events) {
    if (inj.kind == InjectionKind::emergency) {
      for (int k = 0; k * inj.interval + inj.interval / 2 < config_.duration; ++k) {
        emergency_departures_.push_back(k * inj.interval + inj.interval / 2);
      }
    } else if (inj.kind == InjectionKind::transit) {
      for (int line = 0; line < inj.lines; ++line) {
        int entry;
        switch (line % 4) {
          case 0: entry = entry_into(rows / 2, 0, Heading::east); break;
          case 1: entry = entry_into(0, cols / 2, Heading::south); break;
          case 2: entry = entry_into(std::max(0, rows / 2 - 1), cols - 1, Heading::west); break;
          default: entry = entry_into(rows - 1, std::max(0, cols / 2 - 1), Heading::north); break;
        }
        const auto route = straight_route(net_, entry);
        for (int k = 0; k * inj.interval + inj.interval / 2 < config_.duration; ++k) {
          bus_departures_.emplace_back(k * inj.interval + inj.interval / 2, route);
        }
      }
    } else {
      incident_link_ = net_.intersections[idx(net_.intersection_at(rows / 2, cols / 2))]
                           .in_links[static_cast<std::size_t>(Heading::east)];
    }
  }
  std::sort(emergency_departures_.begin(), emergency_departures_.end());
  std::stable_sort(bus_departures_.begin(), bus_departures_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
}

bool Simulation::is_green(int intersection, int phase) const {
  const auto& s = signals_[idx(intersection)];
  return !s.in_yellow() && s.phase == phase;
}

int Simulation::lane_count(int link, int lane) const {
  const auto& l = lane_ref(link, lane);
  return static_cast<int>(l.queue.size() + l.moving.size());
}

int Simulation::lane_capacity(int link) const {
  return static_cast<int>(std::floor(net_.links[idx(link)].length / config_.traffic.jam_spacing));
}

int Simulation::lane_for(const Vehicle& v, std::size_t leg) const {
  if (leg + 1 >= v.route.size()) return 0;
  const Heading here = net_.links[idx(v.route[leg])].heading;
  const Heading next = net_.links[idx(v.route[leg + 1])].heading;
  return next == left_of(here) ? 1 : 0;
}

double Simulation::source_rate(int entry_index) const {
  const auto& link = net_.links[idx(net_.entry_links[idx(entry_index)])];
  double rate = 0.0;
  for (const auto& seg : config_.demand) {
    if (seg.start <= time_) rate = is_north_south(link.heading) ? seg.rate_ns : seg.rate_ew;
  }
  return rate * source_multiplier_[idx(entry_index)];
}

int Simulation::spawn(VehicleClass vclass, std::vector<int> route) {
  Vehicle v;
  v.id = static_cast<int>(vehicles_.size());
  v.vclass = vclass;
  v.route = std::move(route);
  v.entry_time = time_;
  v.lane = lane_for(v, 0);
  vehicles_.push_back(std::move(v));
  return vehicles_.back().id;
}

bool Simulation::try_enter(int vehicle_id) {
  auto& v = vehicles_[idx(vehicle_id)];
  if (lane_count(v.link(), v.lane) >= lane_capacity(v.link())) return false;
  v.state = VehicleState::moving;
  v.pos = 0.0;
  v.speed = v.vclass == VehicleClass::emergency ? config_.traffic.emergency_speed : config_.traffic.free_speed;
  lane_ref(v.link(), v.lane).moving.push_back(vehicle_id);
  return true;
}

void Simulation::advance_signals(std::span<const PhaseRequest> requests) {
  if (requests.size() != signals_.size()) throw Error("one phase request per intersection is required");
  for (std::size_t i = 0; i < signals_.size(); ++i) {
    auto& s = signals_[i];
    PhaseRequest req = requests[i];
    if (req.phase < 0 || req.phase >= kPhaseCount) {
      req.phase = s.yellow_left > 0 ? s.target : s.phase;
      ++clamp_warnings_;
    }
    if (s.yellow_left > 0) {
      if (req.preempt) s.target = req.phase;
      if (--s.yellow_left == 0) {
        s.phase = s.target;
        s.green_elapsed = 0.0;
      }
    }
    if (s.yellow_left == 0 && req.phase != s.phase &&
        (s.green_elapsed >= config_.traffic.min_green || req.preempt)) {
      s.yellow_left = static_cast<int>(config_.traffic.yellow);
      s.target = req.phase;
    }
  }
}

std::vector<int> Simulation::sample_route(std::size_t entry) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& turns = turn_routes_[entry];
  if (unit(rng_) < config_.traffic.straight_share || turns.empty()) return straight_routes_[entry];
  std::uniform_int_distribution<std::size_t> pick(0, turns.size() - 1);
  return turns[pick(rng_)];
}

void Simulation::arrivals() {
  for (std::size_t e = 0; e < backlog_.size(); ++e) {
    while (!backlog_[e].empty() && try_enter(backlog_[e].front())) backlog_[e].pop_front();
  }
  auto admit = [&](int id) {
    const int entry = vehicles_[idx(id)].route.front();
    const auto pos = std::find(net_.entry_links.begin(), net_.entry_links.end(), entry);
    auto& queue = backlog_[static_cast<std::size_t>(pos - net_.entry_links.begin())];
    if (!queue.empty() || !try_enter(id)) queue.push_back(id);
  };
  for (std::size_t e = 0; e < backlog_.size(); ++e) {
    const double rate = source_rate(static_cast<int>(e));
    if (rate <= 0.0) continue;
    std::poisson_distribution<int> arrivals(rate * config_.step);
    const int n = arrivals(rng_);
    for (int k = 0; k < n; ++k) admit(spawn(VehicleClass::normal, sample_route(e)));
  }
  while (next_bus_ < bus_departures_.size() && bus_departures_[next_bus_].first < time_ + config_.step) {
    admit(spawn(VehicleClass::bus, bus_departures_[next_bus_].second));
    ++next_bus_;
  }
  while (next_emergency_ < emergency_departures_.size() &&
         emergency_departures_[next_emergency_] < time_ + config_.step) {
    std::uniform_int_distribution<std::size_t> pick(0, straight_routes_.size() - 1);
    admit(spawn(VehicleClass::emergency, sample_route(pick(rng_))));
    ++next_emergency_;
  }
}

void Simulation::update_incident() {
  if (!incident_link_) return;
  const auto* inc = config_.find(InjectionKind::incident);
  auto& lane = lane_ref(*incident_link_, 0);
  const double length = net_.links[idx(*incident_link_)].length;
  if (time_ == inc->start) {
    auto route = straight_route(net_, *incident_link_);
    const int id = spawn(VehicleClass::normal, std::move(route));
    auto& v = vehicles_[idx(id)];
    v.lane = 0;
    v.state = VehicleState::queued;
    v.broken = true;
    lane.queue.push_front(id);
    lane.stop = length / 2;
    incident_vehicle_ = id;
    incident_active_ = true;
  } else if (time_ == inc->start + inc->duration && incident_vehicle_ >= 0) {
    vehicles_[idx(incident_vehicle_)].broken = false;
    lane.stop = length;
    incident_active_ = false;
  }
}

void Simulation::move_vehicles() {
  const double jam = config_.traffic.jam_spacing;
  for (const auto& link : net_.links) {
    for (int l = 0; l < kLanesPerLink; ++l) {
      auto& lane = lane_ref(link.id, l);
      if (lane.moving.empty()) continue;
      std::vector<int> still;
      still.reserve(lane.moving.size());
      for (int id : lane.moving) {
        auto& v = vehicles_[idx(id)];
        v.pos += v.speed * config_.step;
        if (link.is_exit()) {
          if (v.pos >= link.length) {
            v.state = VehicleState::done;
            v.speed = 0.0;
            v.exit_time = time_ + config_.step;
            ++completed_;
          } else {
            still.push_back(id);
          }
          continue;
        }
        const double tail = lane.stop - static_cast<double>(lane.queue.size()) * jam;
        if (v.pos < tail) {
          still.push_back(id);
          continue;
        }
        v.state = VehicleState::queued;
        v.speed = 0.0;
        v.pos = tail;
        if (v.vclass == VehicleClass::emergency && config_.traffic.emergency_yield) {
          // Queued traffic yields: the ambulance moves up behind any
          // broken-down vehicle and earlier ambulances.
          auto it = lane.queue.begin();
          while (it != lane.queue.end() &&
                 (vehicles_[idx(*it)].broken || vehicles_[idx(*it)].vclass == VehicleClass::emergency)) {
            ++it;
          }
          lane.queue.insert(it, id);
        } else {
          lane.queue.push_back(id);
        }
      }
      lane.moving = std::move(still);
    }
  }
}

void Simulation::serve() {
  const double rate = config_.traffic.saturation_flow * config_.step;
  for (const auto& node : net_.intersections) {
    for (int p = 0; p < kPhaseCount; ++p) {
      const bool green = is_green(node.id, p);
      for (const auto& ll : node.phases[idx(p)]) {
        auto& lane = lane_ref(ll.in_link, ll.lane);
        if (!green) {
          lane.credit = 0.0;
          continue;
        }
        lane.credit = std::min(lane.credit + rate, 1.0);
        if (lane.queue.empty() || lane.credit < 1.0) continue;
        auto& v = vehicles_[idx(lane.queue.front())];
        if (v.broken) continue;
        const std::size_t next = v.leg + 1;
        const int next_link = v.route[next];
        const int next_lane = lane_for(v, next);
        if (lane_count(next_link, next_lane) >= lane_capacity(next_link)) continue;
        lane.queue.pop_front();
        lane.credit -= 1.0;
        v.leg = next;
        v.lane = next_lane;
        v.pos = 0.0;
        v.state = VehicleState::moving;
        v.speed = v.vclass == VehicleClass::emergency ? config_.traffic.emergency_speed : config_.traffic.free_speed;
        lane_ref(next_link, next_lane).moving.push_back(v.id);
      }
    }
  }
}

void Simulation::accumulate() {
  int waiting = 0;
  int queued = 0;
  for (auto& v : vehicles_) {
    if (v.state == VehicleState::done) continue;
    if (v.waiting()) {
      v.cumulative_wait += config_.step;
      v.stopped_for += config_.step;
      ++waiting;
      if (v.state == VehicleState::queued) ++queued;
    } else {
      v.stopped_for = 0.0;
    }
  }
  if (const auto* inc = config_.find(InjectionKind::incident)) {
    if (time_ >= inc->start && time_ < inc->start + inc->duration + 300.0) incident_wait_ += waiting * config_.step;
  }
  queue_sum_ += static_cast<double>(queued) / static_cast<double>(net_.intersections.size());
  per_step_queues_.push_back(queued);
  per_step_delays_.push_back(waiting);
  for (auto& s : signals_) {
    if (!s.in_yellow()) s.green_elapsed += config_.step;
  }
}

void Simulation::step(std::span<const PhaseRequest> requests) {
  if (finished()) return;
  advance_signals(requests);
  arrivals();
  update_incident();
  move_vehicles();
  serve();
  accumulate();
  time_ += config_.step;
}

std::vector<int> Simulation::lane_vehicles(int link, int lane) const {
  const auto& l = lane_ref(link, lane);
  std::vector<int> out(l.queue.begin(), l.queue.end());
  for (auto it = l.moving.rbegin(); it != l.moving.rend(); ++it) out.push_back(*it);
  std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(l.queue.size()), out.end(),
                   [&](int a, int b) { return vehicles_[idx(a)].pos > vehicles_[idx(b)].pos; });
  return out;
}

double Simulation::stop_position(int link, int lane) const { return lane_ref(link, lane).stop; }

double Simulation::vehicle_position(const Vehicle& v) const {
  if (v.state != VehicleState::queued) return v.pos;
  const auto& lane = lane_ref(v.link(), v.lane);
  const auto it = std::find(lane.queue.begin(), lane.queue.end(), v.id);
  return lane.stop - static_cast<double>(it - lane.queue.begin()) * config_.traffic.jam_spacing;
}

namespace {

LaneObservation summarize(std::vector<double>& positions, int waiting, double length) {
  LaneObservation o;
  o.num_vehicle = static_cast<int>(positions.size());
  o.num_waiting_vehicle = waiting;
  if (positions.size() <= 1) {
    o.vehicle_dist = length / static_cast<double>(positions.size() + 1);
  } else {
    const auto [lo, hi] = std::minmax_element(positions.begin(), positions.end());
    o.vehicle_dist = (*hi - *lo) / static_cast<double>(positions.size() - 1);
  }
  return o;
}

}  // namespace

LaneObservation Simulation::observe_lane(int link, int lane) const {
  const auto& l = lane_ref(link, lane);
  std::vector<double> positions;
  positions.reserve(l.queue.size() + l.moving.size());
  for (std::size_t i = 0; i < l.queue.size(); ++i) {
    positions.push_back(l.stop - static_cast<double>(i) * config_.traffic.jam_spacing);
  }
  for (int id : l.moving) positions.push_back(vehicles_[idx(id)].pos);
  return summarize(positions, static_cast<int>(l.queue.size()), net_.links[idx(link)].length);
}

LaneObservation Simulation::observe_link(int link) const {
  std::vector<double> positions;
  int waiting = 0;
  for (int lane = 0; lane < kLanesPerLink; ++lane) {
    const auto& l = lane_ref(link, lane);
    for (std::size_t i = 0; i < l.queue.size(); ++i) {
      positions.push_back(l.stop - static_cast<double>(i) * config_.traffic.jam_spacing);
    }
    for (int id : l.moving) positions.push_back(vehicles_[idx(id)].pos);
    waiting += static_cast<int>(l.queue.size());
  }
  return summarize(positions, waiting, net_.links[idx(link)].length);
}

PhaseObservations Simulation::observe(int intersection) const {
  PhaseObservations out;
  const auto& node = net_.intersections[idx(intersection)];
  for (int p = 0; p < kPhaseCount; ++p) {
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& ll = node.phases[idx(p)][s];
      out[idx(p)][s] = LaneLinkObservation{observe_lane(ll.in_link, ll.lane), observe_link(ll.out_link)};
    }
  }
  return out;
}

int Simulation::intersection_queue(int intersection) const {
  int total = 0;
  for (int link : net_.intersections[idx(intersection)].in_links) {
    for (int lane = 0; lane < kLanesPerLink; ++lane) total += static_cast<int>(lane_ref(link, lane).queue.size());
  }
  return total;
}

double SimulationMetrics::mean_delay_excluding(std::optional<VehicleClass> excluded) const {
  double sum = 0.0;
  int count = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (excluded && static_cast<std::size_t>(*excluded) == c) continue;
    sum += class_delay_sum[c];
    count += class_count[c];
  }
  return count > 0 ? sum / count : 0.0;
}

SimulationMetrics Simulation::metrics() const {
  SimulationMetrics m;
  double delay_sum = 0.0, person_sum = 0.0, occ_sum = 0.0;
  for (const auto& v : vehicles_) {
    const auto c = static_cast<std::size_t>(v.vclass);
    m.class_delay_sum[c] += v.cumulative_wait;
    m.class_count[c] += 1;
    delay_sum += v.cumulative_wait;
    person_sum += occupancy(v.vclass) * v.cumulative_wait;
    occ_sum += occupancy(v.vclass);
  }
  m.injected = static_cast<int>(vehicles_.size());
  m.avg_delay = m.injected > 0 ? delay_sum / m.injected : 0.0;
  const double steps = static_cast<double>(per_step_queues_.size());
  m.avg_queue = steps > 0 ? queue_sum_ / steps : 0.0;
  m.throughput = completed_;
  const auto e = static_cast<std::size_t>(VehicleClass::emergency);
  if (m.class_count[e] > 0) m.emergency_delay = m.class_delay_sum[e] / m.class_count[e];
  if (m.class_count[static_cast<std::size_t>(VehicleClass::bus)] > 0) m.bus_person_delay = person_sum / occ_sum;
  if (const auto* inc = config_.find(InjectionKind::incident)) {
    const double start = inc->start;
    const double end = inc->start + inc->duration + 300.0;
    int active = 0;
    for (const auto& v : vehicles_) {
      if (v.entry_time < end && (!v.exit_time || *v.exit_time > start)) ++active;
    }
    m.incident_delay = active > 0 ? incident_wait_ / active : 0.0;
  }
  m.per_step_queues = per_step_queues_;
  m.per_step_delays = per_step_delays_;
  return m;
}

std::vector<VehicleRecord> Simulation::vehicle_log() const {
  std::vector<VehicleRecord> out;
  out.reserve(vehicles_.size());
  for (const auto& v : vehicles_) out.push_back({v.id, v.vclass, v.entry_time, v.exit_time, v.cumulative_wait});
  return out;
}

nlohmann::json to_json_summary(const SimulationMetrics& m) {
  nlohmann::json j{{"avg_delay", m.avg_delay}, {"avg_queue", m.avg_queue}, {"throughput", m.throughput},
                   {"injected", m.injected}};
  if (m.emergency_delay) j["emergency_delay"] = *m.emergency_delay;
  if (m.bus_person_delay) j["bus_person_delay"] = *m.bus_person_delay;
  if (m.incident_delay) j["incident_delay"] = *m.incident_delay;
  if (m.faults) j["faults"] = m.faults;
  return j;
}

std::string EpisodeLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    nlohmann::json j{{"t", r.time}, {"intersection", r.intersection}, {"phase", r.phase},
                     {"yellow", r.yellow}, {"queue", r.queue}, {"active", r.active}};
    auto& events = j["events"] = nlohmann::json::array();
    for (const auto& e : r.events) {
      nlohmann::json ctx = nlohmann::json::object();
      for (const auto& [var, value] : e.context) ctx[std::string(dsl::variable_name(var))] = value;
      events.push_back({{"kind", e.kind}, {"context", ctx}});
    }
    if (r.fault) j["fault"] = *r.fault;
    out += j.dump();
    out += '\n';
  }
  return out;
}

EpisodeResult run_episode(const ScenarioConfig& scenario, const Controller& controller, std::uint64_t seed,
                          EpisodeOptions options) {
  Simulation sim(scenario, seed);
  const int n = static_cast<int>(sim.network().intersections.size());
  std::vector<PhaseRequest> requests(static_cast<std::size_t>(n));
  std::vector<Decision> decisions(static_cast<std::size_t>(n));
  EpisodeResult result;
  int faults = 0;
  while (!sim.finished()) {
    const int t = static_cast<int>(sim.time());
    for (int i = 0; i < n; ++i) {
      try {
        decisions[idx(i)] = controller(sim, i);
      } catch (const EvalError& e) {
        throw EpisodeFailure("controller failed at t=" + std::to_string(t) + ", intersection " + std::to_string(i) +
                             ": " + e.what());
      }
      requests[idx(i)] = decisions[idx(i)].request;
      if (decisions[idx(i)].fault) ++faults;
    }
    sim.step(requests);
    if (options.record_log) {
      for (int i = 0; i < n; ++i) {
        auto& d = decisions[idx(i)];
        const auto& s = sim.signal(i);
        result.log.add(StepRecord{t, i, s.phase, s.in_yellow(), sim.intersection_queue(i), std::move(d.events),
                                  std::move(d.active), std::move(d.fault)});
      }
    }
  }
  result.metrics = sim.metrics();
  result.metrics.faults = faults;
  result.vehicles = sim.vehicle_log();
  return result;
}

}  // namespace tsevo::sim
