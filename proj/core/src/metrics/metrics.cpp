#include "tsevo/metrics/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "tsevo/error.hpp"

namespace tsevo::metrics {

using events::EventKind;

EventWeights event_weights(EventKind kind) {
  switch (kind) {
    case EventKind::emergency: return {0.6, 0.25, 0.15};
    case EventKind::transit: return {0.5, 0.35, 0.15};
    case EventKind::incident: return {0.6, 0.25, 0.15};
    case EventKind::congestion: break;
  }
  throw ConfigError("no event fitness is defined for congestion");
}

double routine_fitness(const sim::SimulationMetrics& m, double C) {
  const RoutineWeights w;
  return C - (w.delay * m.avg_delay + w.queue * m.avg_queue) + w.throughput * m.throughput;
}

double event_delay(const sim::SimulationMetrics& m, EventKind kind) {
  std::optional<double> d;
  switch (kind) {
    case EventKind::emergency: d = m.emergency_delay; break;
    case EventKind::transit: d = m.bus_person_delay; break;
    case EventKind::incident: d = m.incident_delay; break;
    case EventKind::congestion: break;
  }
  if (!d) throw MissingMetric("episode has no " + std::string(events::kind_name(kind)) + " delay");
  return *d;
}

double normal_delay(const sim::SimulationMetrics& m, EventKind kind) {
  switch (kind) {
    case EventKind::emergency: return m.mean_delay_excluding(sim::VehicleClass::emergency);
    case EventKind::transit: return m.mean_delay_excluding(sim::VehicleClass::bus);
    default: return m.mean_delay_excluding(std::nullopt);
  }
}

double event_fitness(const sim::SimulationMetrics& m, EventKind kind, double C) {
  const auto w = event_weights(kind);
  return C - (w.event * event_delay(m, kind) + w.normal * normal_delay(m, kind) + w.queue * m.avg_queue);
}

double fitness(const sim::SimulationMetrics& m, const FitnessConfig& cfg) {
  return cfg.mode == FitnessMode::routine ? routine_fitness(m, cfg.C) : event_fitness(m, cfg.kind, cfg.C);
}

double default_offset(double seed_raw) {
  if (seed_raw > 0) return 0.0;
  if (seed_raw == 0) return 1.0;
  return -2.0 * seed_raw;
}

double person_delay(std::span<const sim::VehicleRecord> log) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& v : log) {
    const double w = sim::occupancy(v.vclass);
    num += w * v.delay;
    den += w;
  }
  return den > 0 ? num / den : 0.0;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

StatResult welch_and_cohen(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("welch_and_cohen needs at least two values per sample");
  const auto sa = mean_std(a);
  const auto sb = mean_std(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sa.std * sa.std;
  const double vb = sb.std * sb.std;
  const double diff = sa.mean - sb.mean;
  StatResult r;
  r.dof = na + nb - 2.0;
  if (va == 0.0 && vb == 0.0) {
    r.degenerate = true;
    if (diff == 0.0) return r;
    const double inf = std::numeric_limits<double>::infinity();
    r.t = r.d = diff > 0 ? inf : -inf;
    r.p = kSeparatedP;
    return r;
  }
  const double qa = va / na;
  const double qb = vb / nb;
  const double se = std::sqrt(qa + qb);
  r.t = diff / se;
  r.dof = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(r.dof);
  r.p = diff == 0.0 ? 1.0 : 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
  r.d = diff / pooled;
  return r;
}

CostLedger cost_ledger(std::span<const nlohmann::json> events, std::span<const nlohmann::json> sessions) {
  CostLedger c;
  for (const auto& e : events) {
    const auto kind = e.at("event").get<std::string>();
    const auto& data = e.at("data");
    if (kind == "generated") {
      ++c.llm_calls;
    } else if (kind == "evaluated") {
      const long n = data.value("episodes", 0L);
      if (data.value("reference", false)) {
        c.reference_runs += n;
      } else {
        c.sim_runs += n;
      }
    }
  }
  for (const auto& s : sessions) c.wall_clock += s.value("elapsed", 0.0);
  return c;
}

nlohmann::json to_json(const CostLedger& c) {
  return {{"llm_calls", c.llm_calls},
          {"sim_runs", c.sim_runs},
          {"reference_runs", c.reference_runs},
          {"wall_clock", c.wall_clock}};
}

}  // namespace tsevo::metrics
