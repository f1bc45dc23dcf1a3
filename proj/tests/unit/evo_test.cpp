#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "listings.hpp"
#include "tsevo/control/control.hpp"
#include "tsevo/evo/evolution.hpp"
#include "tsevo/util/percentile.hpp"

using namespace tsevo;
using namespace tsevo::evo;
namespace fs = std::filesystem;

namespace {

const std::string kInnovate = "Multiple stagnant generations. Try completely different structure.";

MetricHistory history_of(std::vector<double> q, std::vector<double> d, std::vector<double> t) {
  MetricHistory h;
  h.queues = std::move(q);
  h.delays = std::move(d);
  h.throughputs = std::move(t);
  return h;
}

// Sorted-order interpolation written out longhand.
double brute_percentile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q / 100.0 * static_cast<double>(xs.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= xs.size()) return xs.back();
  return xs[i] * (1.0 - (pos - static_cast<double>(i))) + xs[i + 1] * (pos - static_cast<double>(i));
}

std::vector<sim::ScenarioConfig> small_scenarios() {
  sim::ScenarioOverrides o = sim::desk_scale();
  o.duration = 300;
  return {sim::make_scenario("T1", o), sim::make_scenario("T2", o)};
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("tsevo_evo_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Signals, QueueAboveP75) {
  const auto h = history_of({2, 4, 6, 8}, {1, 1, 1, 1}, {5, 5, 5, 5});
  EXPECT_DOUBLE_EQ(signal_thresholds(h).queue_p75, 6.5);
  const auto s = extract_signals(h, gen::MetricSummary{1, 7, 5}, std::nullopt, 0, 3);
  EXPECT_TRUE(s.high_queue);
  EXPECT_FALSE(s.high_delay);
  EXPECT_FALSE(s.low_throughput);
}

TEST(Signals, ColdStart) {
  const auto s = extract_signals({}, gen::MetricSummary{100, 100, 0}, std::nullopt, 0, 3);
  EXPECT_EQ(s, EvolutionSignals{});
}

TEST(Signals, ForceInnovationIffStagAtLeastTau) {
  for (int tau = 1; tau <= 6; ++tau) {
    for (int stag = 0; stag <= 8; ++stag) {
      EXPECT_EQ(extract_signals({}, std::nullopt, std::nullopt, stag, tau).force_innovation, stag >= tau);
    }
  }
}

TEST(Signals, GainAndDeclineExclusive) {
  EXPECT_TRUE(extract_signals({}, std::nullopt, 0.5, 0, 3).performance_gain);
  EXPECT_TRUE(extract_signals({}, std::nullopt, -0.5, 0, 3).performance_decline);
  const auto z = extract_signals({}, std::nullopt, 0.0, 0, 3);
  EXPECT_FALSE(z.performance_gain || z.performance_decline);
}

TEST(Signals, PercentilesMatchBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 50);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 17;
    MetricHistory h;
    for (int i = 0; i < n; ++i) h.push({u(rng), u(rng), u(rng)});
    const auto t = signal_thresholds(h);
    EXPECT_DOUBLE_EQ(t.queue_p75, brute_percentile(h.queues, 75));
    EXPECT_DOUBLE_EQ(t.delay_p75, brute_percentile(h.delays, 75));
    EXPECT_DOUBLE_EQ(t.throughput_p25, brute_percentile(h.throughputs, 25));
  }
}

TEST(Direction, TableOrderAndNeutral) {
  EvolutionSignals s;
  EXPECT_EQ(direction_text(s), "optimize performance");
  s.force_innovation = true;
  EXPECT_EQ(direction_text(s), kInnovate);
  EvolutionSignals pair;
  pair.high_queue = true;
  pair.performance_gain = true;
  EXPECT_EQ(direction_text(pair),
            "Queue exceeds P75. Focus on queue management.\n"
            "Performance improved. Continue optimizing current direction.");
  EvolutionSignals all{true, true, true, true, false, true};
  const auto text = direction_text(all);
  EXPECT_LT(text.find("Multiple"), text.find("Queue"));
  EXPECT_LT(text.find("Queue"), text.find("Throughput"));
  EXPECT_LT(text.find("Throughput"), text.find("Delay"));
  EXPECT_LT(text.find("Delay"), text.find("Performance improved"));
}

TEST(Config, Checks) {
  EvolutionConfig c;
  EXPECT_THROW(c.check(), ConfigError);  // no scenarios
  c.scenarios = small_scenarios();
  c.check();
  c.population = 1;
  EXPECT_THROW(c.check(), ConfigError);
  c.population = 8;
  c.tau = 0;
  EXPECT_THROW(c.check(), ConfigError);
  c.tau = 3;
  c.mode = Mode::dispatcher_context;
  c.event_kind = events::EventKind::congestion;
  EXPECT_THROW(c.check(), ConfigError);
}

TEST(Solidify, StrictImprovementOnly) {
  const auto dir = fresh_dir("solidify");
  auto st = store::AssetStore::create(dir, "r");
  Skill s = seed_skill();
  const auto c1 = solidify(s, 1.0, {}, 0, st);
  EXPECT_EQ(c1.generation, 0);
  EXPECT_THROW(solidify(s, 1.0, {}, 1, st), NotAnImprovement);
  solidify(s, 2.0, {}, 2, st);
  const auto all = capsules(st);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_LT(all[0].fitness, all[1].fitness);
  EXPECT_LT(all[0].timestamp, all[1].timestamp);
  EXPECT_EQ(st.events("solidified").size(), 2u);
  fs::remove_all(dir);
}

TEST(Evaluation, FaultingSkillIsNegativeInfinity) {
  Skill bad = listings::make("bad", "value[0] += 1 / (num_waiting_vehicle - 2)", "value[0] += 0");
  const auto e = evaluate_routine(bad, small_scenarios(), 0.0);
  EXPECT_TRUE(std::isinf(e.fitness) && e.fitness < 0);
  EXPECT_TRUE(e.failure.has_value());
}

TEST(Evaluation, DispatcherSubstitutionIdentity) {
  sim::ScenarioOverrides o = sim::desk_scale();
  o.duration = 400;
  const std::vector<sim::ScenarioConfig> sc = {sim::make_scenario("B1", o)};
  const auto bank = events::default_bank();
  const auto same = dispatcher_context_evaluate(events::default_skill(events::SkillKind::transit),
                                                events::EventKind::transit, bank, sc);
  const auto direct = control::drive(control::ControllerSpec::for_bank(bank), sc[0], sc[0].seed);
  EXPECT_DOUBLE_EQ(same.fitness, metrics::event_fitness(direct.metrics, events::EventKind::transit));
  EXPECT_THROW(dispatcher_context_evaluate(events::default_skill(events::SkillKind::emergency),
                                           events::EventKind::emergency, bank, small_scenarios()),
               MissingMetric);
}

TEST(Run, MonotoneEliteAndLineage) {
  const auto dir = fresh_dir("monotone");
  auto st = store::AssetStore::create(dir, "r");
  EvolutionConfig cfg;
  cfg.population = 4;
  cfg.generations = 6;
  cfg.scenarios = small_scenarios();
  gen::ScriptedBackend backend(5);
  const auto r = run_evolution(cfg, backend, st);
  ASSERT_EQ(r.records.size(), 6u);
  EXPECT_TRUE(r.completed);
  double prev = r.seed_fitness;
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.best_fitness, prev);
    prev = rec.best_fitness;
  }
  EXPECT_EQ(prev, r.best_fitness);
  EXPECT_GE(r.best_fitness, r.seed_fitness);
  for (const auto& s : st.skills()) {
    if (s.parent_id) EXPECT_NO_THROW(st.skill(*s.parent_id));
    EXPECT_EQ(st.lineage(s.id).back().id, "seed");
  }
  const auto cost = metrics::cost_ledger(st.events());
  EXPECT_EQ(cost.llm_calls, 24);
  EXPECT_EQ(cost.sim_runs, 48);
  EXPECT_EQ(cost.reference_runs, 2);
  fs::remove_all(dir);
}

TEST(Run, ResumeMatchesStraightRun) {
  EvolutionConfig cfg;
  cfg.population = 3;
  cfg.generations = 5;
  cfg.scenarios = small_scenarios();

  const auto straight = fresh_dir("straight");
  {
    auto st = store::AssetStore::create(straight, "r");
    gen::ScriptedBackend b(9);
    run_evolution(cfg, b, st);
  }
  const auto split = fresh_dir("split");
  {
    auto st = store::AssetStore::create(split, "r");
    gen::ScriptedBackend b(9);
    auto first = cfg;
    first.stop_after = 2;
    EXPECT_FALSE(run_evolution(first, b, st).completed);
  }
  {
    auto st = store::AssetStore::open(split);
    gen::ScriptedBackend b(12345);  // state comes from the checkpoint
    EXPECT_TRUE(run_evolution(cfg, b, st).completed);
  }
  for (const char* f : {"events.jsonl", "capsules.jsonl", "skills.jsonl"}) {
    EXPECT_EQ(slurp(straight / f), slurp(split / f)) << f;
  }
  fs::remove_all(straight);
  fs::remove_all(split);
}

TEST(Run, ResumeRejectsOtherConfig) {
  const auto dir = fresh_dir("otherconfig");
  EvolutionConfig cfg;
  cfg.population = 2;
  cfg.generations = 2;
  cfg.scenarios = small_scenarios();
  {
    auto st = store::AssetStore::create(dir, "r");
    gen::ScriptedBackend b(1);
    cfg.stop_after = 1;
    run_evolution(cfg, b, st);
  }
  auto st = store::AssetStore::open(dir);
  gen::ScriptedBackend b(1);
  cfg.tau = 5;
  EXPECT_THROW(run_evolution(cfg, b, st), ConfigError);
  fs::remove_all(dir);
}

namespace {

class FailingBackend : public gen::Backend {
 public:
  std::string name() const override { return "down"; }
  bool deterministic() const override { return true; }
  std::string complete(const gen::DraftRequest&) override { throw GeneratorUnavailable("offline"); }
};

}  // namespace

TEST(Run, GeneratorOutageKeepsCheckpoint) {
  const auto dir = fresh_dir("outage");
  EvolutionConfig cfg;
  cfg.population = 2;
  cfg.generations = 3;
  cfg.scenarios = small_scenarios();
  auto st = store::AssetStore::create(dir, "r");
  FailingBackend down;
  EXPECT_THROW(run_evolution(cfg, down, st), GeneratorUnavailable);
  const auto cp = st.checkpoint();
  ASSERT_TRUE(cp.has_value());
  EXPECT_EQ(cp->at("completed").get<int>(), 0);
  gen::ScriptedBackend up(1);
  auto reopened = store::AssetStore::open(dir);
  EXPECT_TRUE(run_evolution(cfg, up, reopened).completed);
  fs::remove_all(dir);
}
