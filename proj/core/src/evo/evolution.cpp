#include "tsevo/evo/evolution.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "tsevo/control/control.hpp"
#include "tsevo/dsl/validate.hpp"
#include "tsevo/util/parallel.hpp"
#include "tsevo/util/percentile.hpp"

namespace tsevo::evo {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

json summary_json(const gen::MetricSummary& m) {
  return json{{"avg_delay", m.avg_delay}, {"avg_queue", m.avg_queue}, {"throughput", m.throughput}};
}

gen::MetricSummary summary_from(const json& j) {
  return {j.at("avg_delay").get<double>(), j.at("avg_queue").get<double>(), j.at("throughput").get<double>()};
}

json fitness_list(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(fitness_to_json(x));
  return a;
}

}  // namespace

// Signals ------------------------------------------------------------------

void to_json(json& j, const EvolutionSignals& s) {
  j = json{{"high_queue", s.high_queue},
           {"low_throughput", s.low_throughput},
           {"high_delay", s.high_delay},
           {"performance_gain", s.performance_gain},
           {"performance_decline", s.performance_decline},
           {"force_innovation", s.force_innovation}};
}

void from_json(const json& j, EvolutionSignals& s) {
  s.high_queue = j.at("high_queue").get<bool>();
  s.low_throughput = j.at("low_throughput").get<bool>();
  s.high_delay = j.at("high_delay").get<bool>();
  s.performance_gain = j.at("performance_gain").get<bool>();
  s.performance_decline = j.at("performance_decline").get<bool>();
  s.force_innovation = j.at("force_innovation").get<bool>();
}

void MetricHistory::push(const gen::MetricSummary& m) {
  queues.push_back(m.avg_queue);
  delays.push_back(m.avg_delay);
  throughputs.push_back(m.throughput);
}

SignalThresholds signal_thresholds(const MetricHistory& history) {
  if (history.empty()) throw ConfigError("signal thresholds need a nonempty history");
  return {percentile(history.queues, 75.0), percentile(history.delays, 75.0), percentile(history.throughputs, 25.0)};
}

EvolutionSignals extract_signals(const MetricHistory& history, const std::optional<gen::MetricSummary>& current,
                                 std::optional<double> fitness_delta, int stag, int tau) {
  EvolutionSignals s;
  if (current && !history.empty()) {
    const auto t = signal_thresholds(history);
    s.high_queue = current->avg_queue > t.queue_p75;
    s.high_delay = current->avg_delay > t.delay_p75;
    s.low_throughput = current->throughput < t.throughput_p25;
  }
  if (fitness_delta && std::isfinite(*fitness_delta)) {
    s.performance_gain = *fitness_delta > 0;
    s.performance_decline = *fitness_delta < 0;
  }
  s.force_innovation = stag >= tau;
  return s;
}

std::string direction_text(const EvolutionSignals& s) {
  std::vector<std::string_view> lines;
  if (s.force_innovation) lines.push_back("Multiple stagnant generations. Try completely different structure.");
  if (s.high_queue) lines.push_back("Queue exceeds P75. Focus on queue management.");
  if (s.low_throughput) lines.push_back("Throughput below P25. Optimize flow efficiency.");
  if (s.high_delay) lines.push_back("Delay exceeds P75. Reduce vehicle waiting time.");
  if (s.performance_gain) lines.push_back("Performance improved. Continue optimizing current direction.");
  if (s.performance_decline) lines.push_back("Performance declined. Try different strategy approach.");
  if (lines.empty()) return std::string(gen::kNeutralDirection);
  std::string out;
  for (auto l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

// Config -------------------------------------------------------------------

void EvolutionConfig::check() const {
  if (population < 2) throw ConfigError("population must be at least 2");
  if (generations < 0) throw ConfigError("generations must be nonnegative");
  if (tau < 1) throw ConfigError("tau must be at least 1");
  if (scenarios.empty()) throw ConfigError("at least one scenario is required");
  if (max_retries < 0) throw ConfigError("max_retries must be nonnegative");
  if (mode == Mode::dispatcher_context && event_kind == events::EventKind::congestion) {
    throw ConfigError("congestion has no event fitness and cannot be evolved");
  }
}

json EvolutionConfig::fingerprint() const {
  json sc = json::array();
  for (const auto& s : scenarios) sc.push_back(s);
  json j{{"population", population},
         {"generations", generations},
         {"tau", tau},
         {"scenarios", sc},
         {"mode", mode == Mode::routine ? "routine" : "dispatcher_context"},
         {"max_retries", max_retries},
         {"offset", offset ? json(*offset) : json()},
         {"initial", initial ? json(*initial) : json()}};
  if (mode == Mode::dispatcher_context) j["event_kind"] = events::kind_name(event_kind);
  return j;
}

// Records ------------------------------------------------------------------

void to_json(json& j, const GenerationRecord& r) {
  j = json{{"index", r.index},
           {"candidate_ids", r.candidate_ids},
           {"fitness", fitness_list(r.fitness)},
           {"best_id", r.best_id},
           {"best_fitness", fitness_to_json(r.best_fitness)},
           {"mean_fitness", fitness_to_json(r.mean_fitness)},
           {"signals", r.signals},
           {"direction", r.direction},
           {"stagnation", r.stagnation}};
}

void from_json(const json& j, GenerationRecord& r) {
  r.index = j.at("index").get<int>();
  r.candidate_ids = j.at("candidate_ids").get<std::vector<std::string>>();
  r.fitness.clear();
  for (const auto& f : j.at("fitness")) r.fitness.push_back(fitness_from_json(f));
  r.best_id = j.at("best_id").get<std::string>();
  r.best_fitness = fitness_from_json(j.at("best_fitness"));
  r.mean_fitness = fitness_from_json(j.at("mean_fitness"));
  r.signals = j.at("signals").get<EvolutionSignals>();
  r.direction = j.at("direction").get<std::string>();
  r.stagnation = j.at("stagnation").get<int>();
}

void to_json(json& j, const Capsule& c) {
  j = json{{"skill", c.skill},
           {"fitness", fitness_to_json(c.fitness)},
           {"metrics", c.metrics},
           {"generation", c.generation},
           {"timestamp", c.timestamp}};
}

Capsule capsule_from_json(const json& j) {
  Capsule c;
  c.skill = j.at("skill").get<Skill>();
  c.fitness = fitness_from_json(j.at("fitness"));
  c.metrics = j.at("metrics");
  c.generation = j.at("generation").get<int>();
  c.timestamp = j.at("timestamp").get<std::uint64_t>();
  return c;
}

std::vector<Capsule> capsules(const store::AssetStore& store) {
  std::vector<Capsule> out;
  for (const auto& r : store.records(store::RecordKind::capsule)) out.push_back(capsule_from_json(r.payload));
  return out;
}

Capsule solidify(const Skill& skill, double fitness, const json& metrics, int generation, store::AssetStore& store) {
  for (const auto& prior : capsules(store)) {
    if (!(fitness > prior.fitness)) {
      throw NotAnImprovement("fitness " + std::to_string(fitness) + " does not exceed capsule " + prior.skill.id +
                             " (" + std::to_string(prior.fitness) + ")");
    }
  }
  Capsule c{skill, fitness, metrics, generation, store.last_seq() + 1};
  store.append(store::RecordKind::capsule, c);
  store.append_event("solidified", json{{"generation", generation}, {"id", skill.id}, {"fitness", fitness_to_json(fitness)}});
  return c;
}

// Evaluation ---------------------------------------------------------------

gen::MetricSummary CandidateEvaluation::summary() const {
  gen::MetricSummary s;
  if (metrics.empty()) return s;
  for (const auto& m : metrics) {
    s.avg_delay += m.avg_delay;
    s.avg_queue += m.avg_queue;
    s.throughput += m.throughput;
  }
  const auto n = static_cast<double>(metrics.size());
  s.avg_delay /= n;
  s.avg_queue /= n;
  s.throughput /= n;
  return s;
}

json CandidateEvaluation::snapshot() const {
  if (failure) return json{{"failure", *failure}};
  json per = json::array();
  for (const auto& m : metrics) per.push_back(sim::to_json_summary(m));
  return json{{"mean", summary_json(summary())}, {"scenarios", per}};
}

namespace {

template <typename Spec, typename Score>
CandidateEvaluation evaluate_with(const Spec& spec, std::span<const sim::ScenarioConfig> scenarios, bool record_log,
                                  const Score& score) {
  CandidateEvaluation out;
  double total = 0.0;
  try {
    for (const auto& scenario : scenarios) {
      auto result = control::drive(spec, scenario, scenario.seed, sim::EpisodeOptions{record_log});
      if (result.metrics.faults > 0) {
        out.failure = std::to_string(result.metrics.faults) + " evaluation faults on " + scenario.name;
        break;
      }
      total += score(result.metrics);
      out.metrics.push_back(std::move(result.metrics));
      if (record_log) out.logs.push_back(std::move(result.log));
    }
  } catch (const EpisodeFailure& e) {
    out.failure = e.what();
  } catch (const EvalError& e) {
    out.failure = e.what();
  }
  if (out.failure) {
    out.fitness = kNegInf;
    out.metrics.clear();
    return out;
  }
  out.fitness = total / static_cast<double>(scenarios.size());
  return out;
}

}  // namespace

CandidateEvaluation evaluate_routine(const Skill& skill, std::span<const sim::ScenarioConfig> scenarios, double offset,
                                     bool record_log) {
  const auto spec = control::ControllerSpec::for_skill(skill, false);
  return evaluate_with(spec, scenarios, record_log,
                       [&](const sim::SimulationMetrics& m) { return metrics::routine_fitness(m, offset); });
}

CandidateEvaluation dispatcher_context_evaluate(const Skill& candidate, events::EventKind kind,
                                                const events::SkillBank& bank,
                                                std::span<const sim::ScenarioConfig> scenarios, double offset,
                                                bool record_log) {
  events::SkillBank substituted = bank;
  substituted.set(events::skill_for(kind), candidate);
  if (!substituted.complete()) throw ConfigError("skill bank is incomplete");
  const auto spec = control::ControllerSpec::for_bank(std::move(substituted));
  return evaluate_with(spec, scenarios, record_log,
                       [&](const sim::SimulationMetrics& m) { return metrics::event_fitness(m, kind, offset); });
}

// The loop -----------------------------------------------------------------

namespace {

struct LoopState {
  int completed = 0;  // generations done
  Skill elite;
  double elite_fitness = 0.0;
  gen::MetricSummary elite_metrics;
  double seed_fitness = 0.0;
  double offset = 0.0;
  int best_generation = 0;
  int stag = 0;
  MetricHistory history;
  double last_candidate_best = 0.0;  // previous generation's best draft fitness
  EvolutionSignals signals;
  std::vector<GenerationRecord> records;
};

json history_json(const MetricHistory& h) {
  return json{{"queues", h.queues}, {"delays", h.delays}, {"throughputs", h.throughputs}};
}

json state_json(const LoopState& s, const json& fingerprint, const gen::Backend& backend) {
  json records = json::array();
  for (const auto& r : s.records) records.push_back(r);
  return json{{"completed", s.completed},
              {"elite", s.elite},
              {"elite_fitness", fitness_to_json(s.elite_fitness)},
              {"elite_metrics", summary_json(s.elite_metrics)},
              {"seed_fitness", fitness_to_json(s.seed_fitness)},
              {"offset", s.offset},
              {"best_generation", s.best_generation},
              {"stag", s.stag},
              {"history", history_json(s.history)},
              {"last_candidate_best", fitness_to_json(s.last_candidate_best)},
              {"signals", s.signals},
              {"records", records},
              {"backend", backend.state()},
              {"config", fingerprint}};
}

LoopState state_from(const json& j) {
  LoopState s;
  s.completed = j.at("completed").get<int>();
  s.elite = j.at("elite").get<Skill>();
  s.elite_fitness = fitness_from_json(j.at("elite_fitness"));
  s.elite_metrics = summary_from(j.at("elite_metrics"));
  s.seed_fitness = fitness_from_json(j.at("seed_fitness"));
  s.offset = j.at("offset").get<double>();
  s.best_generation = j.at("best_generation").get<int>();
  s.stag = j.at("stag").get<int>();
  const auto& h = j.at("history");
  s.history.queues = h.at("queues").get<std::vector<double>>();
  s.history.delays = h.at("delays").get<std::vector<double>>();
  s.history.throughputs = h.at("throughputs").get<std::vector<double>>();
  s.last_candidate_best = fitness_from_json(j.at("last_candidate_best"));
  s.signals = j.at("signals").get<EvolutionSignals>();
  for (const auto& r : j.at("records")) s.records.push_back(r.get<GenerationRecord>());
  return s;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class Loop {
 public:
  Loop(const EvolutionConfig& cfg, gen::Backend& backend, store::AssetStore& store)
      : cfg_(cfg), backend_(backend), store_(store), fingerprint_(cfg.fingerprint()) {
    if (cfg_.mode == Mode::dispatcher_context) {
      bank_ = cfg_.bank ? *cfg_.bank : events::default_bank();
      whitelist_ = dsl::VariableWhitelist::with_events();
    } else {
      whitelist_ = dsl::VariableWhitelist::lane();
    }
  }

  EvolutionResult run() {
    const auto start = std::chrono::steady_clock::now();
    if (auto cp = store_.checkpoint()) {
      if (cp->at("config") != fingerprint_) throw ConfigError("checkpoint was written by a different configuration");
      store_.truncate_to(cp->at("seq").get<std::uint64_t>());
      state_ = state_from(*cp);
      if (!cp->at("backend").is_null()) backend_.restore(cp->at("backend"));
      store_.log_session(json{{"note", "resumed"}, {"generation", state_.completed}});
    } else {
      store_.truncate_to(0);
      store_.log_session(json{{"note", "started"}, {"backend", backend_.name()}});
      initialise();
    }

    EvolutionResult result;
    const int stop = cfg_.stop_after ? std::min(*cfg_.stop_after, cfg_.generations) : cfg_.generations;
    while (state_.completed < stop) step(state_.completed + 1);
    result.completed = state_.completed >= cfg_.generations;

    result.best = state_.elite;
    result.best_fitness = state_.elite_fitness;
    result.seed_fitness = state_.seed_fitness;
    result.best_generation = state_.best_generation;
    result.offset = state_.offset;
    result.records = state_.records;
    store_.log_session(json{{"note", result.completed ? "finished" : "stopped"},
                            {"generation", state_.completed},
                            {"elapsed", elapsed_since(start)}});
    return result;
  }

 private:
  CandidateEvaluation evaluate(const Skill& skill, double offset) const {
    if (cfg_.mode == Mode::dispatcher_context) {
      return dispatcher_context_evaluate(skill, cfg_.event_kind, bank_, cfg_.scenarios, offset);
    }
    return evaluate_routine(skill, cfg_.scenarios, offset);
  }

  std::optional<events::EventKind> event_kind() const {
    if (cfg_.mode == Mode::dispatcher_context) return cfg_.event_kind;
    return std::nullopt;
  }

  void initialise() {
    Skill seed = cfg_.initial ? *cfg_.initial
                 : cfg_.mode == Mode::dispatcher_context
                     ? events::default_skill(events::skill_for(cfg_.event_kind))
                     : seed_skill();
    if (seed.id.empty()) seed.id = "seed";
    seed.parent_id.reset();
    seed.generation = 0;
    const auto report = dsl::sandbox_check(seed, whitelist_);
    if (!report.ok) throw dsl::InvalidSkill(report);

    auto raw = evaluate(seed, 0.0);
    if (raw.failure) throw ConfigError("the initial skill fails to run: " + *raw.failure);
    const double offset = cfg_.offset ? *cfg_.offset : metrics::default_offset(raw.fitness);
    const double fitness = raw.fitness + offset;

    seed.fitness = fitness;
    seed.metrics_snapshot = raw.snapshot();
    store_.append_skill(seed);
    store_.append_event("evaluated", json{{"generation", 0},
                                          {"id", seed.id},
                                          {"episodes", cfg_.scenarios.size()},
                                          {"reference", true},
                                          {"fitness", fitness_to_json(fitness)}});

    state_.elite = seed;
    state_.elite_fitness = fitness;
    state_.elite_metrics = raw.summary();
    state_.seed_fitness = fitness;
    state_.offset = offset;
    state_.last_candidate_best = fitness;
    solidify(seed, fitness, seed.metrics_snapshot, 0, store_);
    checkpoint();
  }

  void step(int g) {
    const std::string direction = direction_text(state_.signals);
    gen::DraftRequest request;
    request.elite = state_.elite;
    request.prompts = gen::build_prompts(state_.elite, state_.elite_metrics, direction, whitelist_, event_kind());
    request.force_innovation = state_.signals.force_innovation;
    request.event_variables = cfg_.mode == Mode::dispatcher_context;
    request.event_kind = event_kind();

    auto audit = [&](std::string_view kind, json data) {
      data["generation"] = g;
      store_.append_event(kind, std::move(data));
    };
    auto drafts = gen::generate(backend_, request, cfg_.population, whitelist_, cfg_.max_retries, audit).drafts;

    for (std::size_t i = 0; i < drafts.size(); ++i) {
      drafts[i].id = "g" + std::to_string(g) + "-c" + std::to_string(i);
      drafts[i].parent_id = state_.elite.id;
      drafts[i].generation = g;
    }
    std::vector<CandidateEvaluation> evals(drafts.size());
    parallel_for(drafts.size(), cfg_.jobs, [&](std::size_t i) { evals[i] = evaluate(drafts[i], state_.offset); });

    GenerationRecord rec;
    rec.index = g;
    std::optional<std::size_t> best;
    double sum = 0.0;
    int finite = 0;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      const auto& ev = evals[i];
      drafts[i].fitness = ev.fitness;
      drafts[i].metrics_snapshot = ev.snapshot();
      store_.append_skill(drafts[i]);
      json data{{"id", drafts[i].id},
                {"episodes", cfg_.scenarios.size()},
                {"reference", false},
                {"fitness", fitness_to_json(ev.fitness)}};
      if (ev.failure) data["failure"] = *ev.failure;
      audit("evaluated", std::move(data));
      rec.candidate_ids.push_back(drafts[i].id);
      rec.fitness.push_back(ev.fitness);
      if (std::isfinite(ev.fitness)) {
        sum += ev.fitness;
        ++finite;
        if (!best || ev.fitness > evals[*best].fitness) best = i;
      }
    }

    std::optional<gen::MetricSummary> current;
    std::optional<double> delta;
    if (best) {
      const auto& ev = evals[*best];
      current = ev.summary();
      delta = ev.fitness - state_.last_candidate_best;
      if (ev.fitness > state_.elite_fitness) {
        state_.elite = drafts[*best];
        state_.elite_fitness = ev.fitness;
        state_.elite_metrics = *current;
        state_.best_generation = g;
        state_.stag = 0;
        solidify(drafts[*best], ev.fitness, drafts[*best].metrics_snapshot, g, store_);
      } else {
        ++state_.stag;
      }
    } else {
      ++state_.stag;
    }

    state_.signals = extract_signals(state_.history, current, delta, state_.stag, cfg_.tau);
    if (current) {
      state_.history.push(*current);
      state_.last_candidate_best = evals[*best].fitness;
    }

    rec.best_id = state_.elite.id;
    rec.best_fitness = state_.elite_fitness;
    rec.mean_fitness = finite > 0 ? sum / finite : kNegInf;
    rec.signals = state_.signals;
    rec.direction = direction_text(state_.signals);
    rec.stagnation = state_.stag;
    state_.records.push_back(rec);
    state_.completed = g;
    audit("checkpointed", json(rec));
    checkpoint();
  }

  void checkpoint() { store_.write_checkpoint(state_json(state_, fingerprint_, backend_)); }

  const EvolutionConfig& cfg_;
  gen::Backend& backend_;
  store::AssetStore& store_;
  json fingerprint_;
  events::SkillBank bank_;
  dsl::VariableWhitelist whitelist_;
  LoopState state_;
};

}  // namespace

EvolutionResult run_evolution(const EvolutionConfig& config, gen::Backend& backend, store::AssetStore& store) {
  config.check();
  return Loop(config, backend, store).run();
}

}  // namespace tsevo::evo
