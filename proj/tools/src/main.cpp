#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "common.hpp"
#include "tsevo/dsl/validate.hpp"
#include "tsevo/evo/evolution.hpp"
#include "tsevo/gen/generator.hpp"
#include "tsevo/metrics/metrics.hpp"
#include "tsevo/store/store.hpp"

using namespace tsevo;
using namespace tsevo::cli;
using nlohmann::json;

namespace {

std::vector<std::string> g_argv;

std::vector<sim::ScenarioConfig> resolve_all(const std::vector<std::string>& specs) {
  std::vector<sim::ScenarioConfig> out;
  for (const auto& s : specs) out.push_back(sim::resolve_scenario(s));
  return out;
}

// evolve ------------------------------------------------------------------

struct EvolveArgs {
  std::vector<std::string> scenarios;
  std::string mode = "routine";
  std::string event = "emergency";
  std::string generator = "scripted";
  int pop = 8;
  int gens = 30;
  int tau = 3;
  std::uint64_t seed = 42;
  int jobs = 1;
  std::string out;
  bool resume = false;
  std::optional<double> offset;
  std::string initial;
  std::optional<int> stop_after;
};

int cmd_evolve(const EvolveArgs& a) {
  evo::EvolutionConfig cfg;
  cfg.population = a.pop;
  cfg.generations = a.gens;
  cfg.tau = a.tau;
  cfg.jobs = a.jobs;
  cfg.offset = a.offset;
  cfg.stop_after = a.stop_after;
  cfg.scenarios = resolve_all(a.scenarios);
  if (a.mode == "dispatcher_context") {
    cfg.mode = evo::Mode::dispatcher_context;
    auto kind = events::parse_skill_kind(a.event);
    if (!kind || *kind == events::SkillKind::normal) throw UsageError("unknown event kind '" + a.event + "'");
    for (auto k : events::kEventKinds) {
      if (events::skill_for(k) == *kind) cfg.event_kind = k;
    }
  } else if (a.mode != "routine") {
    throw UsageError("--mode must be routine or dispatcher_context");
  }
  if (!a.initial.empty()) cfg.initial = load_skill(a.initial);

  std::unique_ptr<gen::Backend> backend;
  if (a.generator == "scripted") {
    backend = std::make_unique<gen::ScriptedBackend>(a.seed);
  } else if (a.generator == "remote") {
    backend = std::make_unique<gen::RemoteBackend>(gen::RemoteConfig::from_env());
  } else {
    throw UsageError("--generator must be scripted or remote");
  }

  const std::filesystem::path out(a.out);
  auto store = [&] {
    if (a.resume) return store::AssetStore::open(out);
    json id = cfg.fingerprint();
    id["seed"] = a.seed;
    id["generator"] = backend->name();
    return store::AssetStore::create(out, store::derive_run_id(id));
  }();
  write_manifest(out, "evolve", g_argv,
                 json{{"config", cfg.fingerprint()},
                      {"seed", a.seed},
                      {"generator", backend->name()},
                      {"deterministic", backend->deterministic()},
                      {"run", store.run_id()}});

  const auto result = evo::run_evolution(cfg, *backend, store);
  const double gain = 100.0 * (result.best_fitness - result.seed_fitness) / std::abs(result.seed_fitness);
  std::ofstream summary(out / "summary.csv");
  for (std::ostream* o : {static_cast<std::ostream*>(&summary), &std::cout}) {
    *o << "skill,scenarios,initial_fitness,best_fitness,best_generation,improvement_pct\n";
    std::string names;
    for (const auto& s : cfg.scenarios) names += (names.empty() ? "" : "+") + s.name;
    const std::string label =
        cfg.mode == evo::Mode::routine ? "normal" : std::string(events::kind_name(cfg.event_kind));
    *o << label << ',' << names << ',' << csv_number(result.seed_fitness) << ',' << csv_number(result.best_fitness)
       << ',' << result.best_generation << ',' << csv_number(gain) << '\n';
  }
  std::ofstream(out / "best_skill.json") << json(result.best).dump(2) << '\n';
  if (!result.completed) std::cerr << "stopped after generation " << result.records.size() << "; rerun with --resume\n";
  return 0;
}

// evaluate / baseline ------------------------------------------------------

int cmd_evaluate(const std::string& skill_file, const std::string& capsule, const std::string& run,
                 bool event_aware, const std::string& scenario, const std::vector<std::string>& seeds_raw, int jobs,
                 const std::string& out_path) {
  Skill skill;
  if (!skill_file.empty()) {
    skill = load_skill(skill_file);
  } else {
    if (run.empty()) throw UsageError("--capsule needs --run");
    skill = store::AssetStore::open(run).skill(capsule);
  }
  const auto whitelist = event_aware ? dsl::VariableWhitelist::with_events() : dsl::VariableWhitelist::lane();
  if (auto report = dsl::sandbox_check(skill, whitelist); !report.ok) throw dsl::InvalidSkill(report);
  const auto seeds = parse_seeds(seeds_raw);
  const auto sc = sim::resolve_scenario(scenario);
  const auto runs = run_seeds(control::ControllerSpec::for_skill(skill, event_aware), sc, seeds, jobs);
  Output out(out_path);
  write_metric_table(out.stream(), skill.id, seeds, runs);
  if (out.is_file()) {
    write_manifest(std::filesystem::path(out_path).parent_path(), "evaluate", g_argv,
                   json{{"skill", skill}, {"scenario", sc}, {"seeds", seeds}});
  }
  return 0;
}

int cmd_baseline(const std::string& method, const std::string& scenario, const std::vector<std::string>& seeds_raw,
                 int jobs, const std::string& out_path) {
  const auto spec = method_spec(method);
  const auto seeds = parse_seeds(seeds_raw);
  const auto sc = sim::resolve_scenario(scenario);
  const auto runs = run_seeds(spec, sc, seeds, jobs);
  Output out(out_path);
  write_metric_table(out.stream(), spec.label(), seeds, runs);
  if (out.is_file()) {
    write_manifest(std::filesystem::path(out_path).parent_path(), "baseline", g_argv,
                   json{{"method", method}, {"scenario", sc}, {"seeds", seeds}});
  }
  return 0;
}

// compare ------------------------------------------------------------------

int cmd_compare(const std::vector<std::string>& methods, const std::vector<std::string>& scenarios,
                const std::vector<std::string>& seeds_raw, int jobs, const std::string& out_path) {
  if (methods.size() < 2) throw UsageError("compare needs at least two --method flags");
  const auto seeds = parse_seeds(seeds_raw);
  std::vector<control::ControllerSpec> specs;
  for (const auto& m : methods) specs.push_back(method_spec(m));
  Output out(out_path);
  auto& os = out.stream();
  os << "scenario,metric,method_a,method_b,mean_a,std_a,mean_b,std_b,t,p,d\n";
  json inputs{{"methods", methods}, {"seeds", seeds}, {"scenarios", json::array()}};
  for (const auto& name : scenarios) {
    const auto sc = sim::resolve_scenario(name);
    inputs["scenarios"].push_back(sc);
    std::vector<std::vector<sim::SimulationMetrics>> runs;
    for (const auto& spec : specs) runs.push_back(run_seeds(spec, sc, seeds, jobs));
    for (const auto& col : metric_columns()) {
      for (std::size_t i = 0; i < specs.size(); ++i) {
        for (std::size_t j = i + 1; j < specs.size(); ++j) {
          std::vector<double> a, b;
          for (const auto& m : runs[i]) {
            if (auto v = col.get(m)) a.push_back(*v);
          }
          for (const auto& m : runs[j]) {
            if (auto v = col.get(m)) b.push_back(*v);
          }
          if (a.size() < 2 || b.size() < 2) continue;
          const auto ma = metrics::mean_std(a);
          const auto mb = metrics::mean_std(b);
          const auto st = metrics::welch_and_cohen(a, b);
          os << sc.name << ',' << col.name << ',' << methods[i] << ',' << methods[j] << ',' << csv_number(ma.mean)
             << ',' << csv_number(ma.std) << ',' << csv_number(mb.mean) << ',' << csv_number(mb.std) << ','
             << csv_number(st.t) << ',' << csv_number(st.p) << ',' << csv_number(st.d) << '\n';
        }
      }
    }
  }
  if (out.is_file()) write_manifest(std::filesystem::path(out_path).parent_path(), "compare", g_argv, inputs);
  return 0;
}

// inspect / replay / export ------------------------------------------------

int cmd_inspect(const std::string& run, const std::string& skill_id, const std::string& lineage_id, bool list_capsules,
                bool cost) {
  const auto st = store::AssetStore::open(run);
  json out;
  if (!skill_id.empty()) {
    out = st.skill(skill_id);
  } else if (!lineage_id.empty()) {
    out = json::array();
    for (const auto& s : st.lineage(lineage_id)) out.push_back(json{{"id", s.id}, {"generation", s.generation},
                                                                    {"fitness", s.fitness ? fitness_to_json(*s.fitness) : json()}});
  } else if (list_capsules) {
    out = json::array();
    for (const auto& c : evo::capsules(st)) out.push_back(c);
  } else if (cost) {
    const auto events = st.events();
    const auto sessions = st.sessions();
    out = metrics::to_json(metrics::cost_ledger(events, sessions));
  } else {
    const auto cp = st.checkpoint();
    out = json{{"run", st.run_id()},
               {"records", st.records().size()},
               {"skills", st.skills().size()},
               {"capsules", st.records(store::RecordKind::capsule).size()},
               {"completed_generations", cp ? cp->at("completed") : json(0)},
               {"best", cp ? cp->at("elite").at("id") : json()},
               {"best_fitness", cp ? cp->at("elite_fitness") : json()}};
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_replay(const std::string& method, const std::string& scenario, std::uint64_t seed, const std::string& log_path) {
  const auto spec = method_spec(method);
  const auto sc = sim::resolve_scenario(scenario);
  const auto result = control::drive(spec, sc, seed, sim::EpisodeOptions{true});
  Output out(log_path);
  out.stream() << result.log.to_jsonl();
  std::cerr << sim::to_json_summary(result.metrics).dump() << '\n';
  if (out.is_file()) {
    write_manifest(std::filesystem::path(log_path).parent_path(), "replay", g_argv,
                   json{{"method", method}, {"scenario", sc}, {"seed", seed}});
  }
  return 0;
}

int cmd_export(const std::string& run, const std::string& out_dir) {
  const auto st = store::AssetStore::open(run);
  const std::filesystem::path dir(out_dir.empty() ? run : out_dir);
  std::filesystem::create_directories(dir);
  std::ofstream curve(dir / "curve.csv");
  curve << "generation,best_fitness,mean_fitness,signals\n";
  for (const auto& e : st.events("checkpointed")) {
    const auto rec = e.at("data").get<evo::GenerationRecord>();
    std::string sig;
    const json sj = rec.signals;
    for (const auto& [k, v] : sj.items()) {
      if (v.get<bool>()) sig += (sig.empty() ? "" : "|") + k;
    }
    curve << rec.index << ',' << csv_number(rec.best_fitness) << ',' << csv_number(rec.mean_fitness) << ',' << sig
          << '\n';
  }
  std::ofstream caps(dir / "capsules.csv");
  caps << "generation,id,fitness,avg_delay,avg_queue,throughput\n";
  for (const auto& c : evo::capsules(st)) {
    caps << c.generation << ',' << c.skill.id << ',' << csv_number(c.fitness);
    const auto mean = c.metrics.value("mean", json::object());
    for (const char* k : {"avg_delay", "avg_queue", "throughput"}) {
      caps << ',';
      if (mean.contains(k)) caps << csv_number(mean[k].get<double>());
    }
    caps << '\n';
  }
  write_manifest(dir, "export", g_argv, json{{"run", st.run_id()}, {"run_dir", run}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"tsevo: evolve interpretable traffic-signal skills"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(TSEVO_VERSION));

  EvolveArgs ev;
  auto* evolve = app.add_subcommand("evolve", "Run a skill evolution");
  evolve->add_option("--scenario", ev.scenarios, "Scenario family, <family>@desk or YAML file (repeatable)")
      ->required();
  evolve->add_option("--mode", ev.mode, "routine or dispatcher_context")->capture_default_str();
  evolve->add_option("--event", ev.event, "Event skill to evolve in dispatcher_context mode")->capture_default_str();
  evolve->add_option("--generator", ev.generator, "scripted or remote")->capture_default_str();
  evolve->add_option("--pop", ev.pop, "Drafts per generation")->capture_default_str();
  evolve->add_option("--gens", ev.gens, "Generations")->capture_default_str();
  evolve->add_option("--tau", ev.tau, "Stagnation threshold")->capture_default_str();
  evolve->add_option("--seed", ev.seed, "Scripted generator seed")->capture_default_str();
  evolve->add_option("--jobs", ev.jobs, "Concurrent candidate evaluations")->capture_default_str();
  evolve->add_option("--out", ev.out, "Run directory")->required();
  evolve->add_flag("--resume", ev.resume, "Continue from the run directory's checkpoint");
  evolve->add_option("--offset", ev.offset, "Fitness offset C (derived from the seed when omitted)");
  evolve->add_option("--initial", ev.initial, "Starting skill JSON");
  evolve->add_option("--stop-after", ev.stop_after, "Stop after this many generations");

  std::string skill_file, capsule, run, scenario, out_path, method;
  std::vector<std::string> seeds{"1-5"};
  int jobs = 1;
  bool event_aware = false;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a skill over seeds");
  auto* skill_opt = evaluate->add_option("--skill", skill_file, "Skill JSON file");
  evaluate->add_option("--capsule", capsule, "Skill or capsule id in --run")->excludes(skill_opt);
  evaluate->add_option("--run", run, "Run directory");
  evaluate->add_flag("--events", event_aware, "Bind event context (event whitelist)");
  evaluate->add_option("--scenario", scenario)->required();
  evaluate->add_option("--seeds", seeds, "Seeds: 1,2,3 or 1-5")->capture_default_str();
  evaluate->add_option("--jobs", jobs)->capture_default_str();
  evaluate->add_option("--out", out_path, "CSV file (stdout when omitted)");

  auto* baseline = app.add_subcommand("baseline", "Run a baseline controller over seeds");
  baseline->add_option("--method", method, "fixed_time, max_pressure, handcrafted_preemption or dispatcher")
      ->required();
  baseline->add_option("--scenario", scenario)->required();
  baseline->add_option("--seeds", seeds)->capture_default_str();
  baseline->add_option("--jobs", jobs)->capture_default_str();
  baseline->add_option("--out", out_path);

  std::vector<std::string> methods, scenarios;
  auto* compare = app.add_subcommand("compare", "Welch t-test and Cohen's d between methods");
  compare->add_option("--method", methods, "Method (repeatable)")->required();
  compare->add_option("--scenario", scenarios, "Scenario (repeatable)")->required();
  compare->add_option("--seeds", seeds)->capture_default_str();
  compare->add_option("--jobs", jobs)->capture_default_str();
  compare->add_option("--out", out_path);

  std::string skill_id, lineage_id;
  bool list_capsules = false, cost = false;
  auto* inspect = app.add_subcommand("inspect", "Show run contents");
  inspect->add_option("--run", run)->required();
  inspect->add_option("--skill", skill_id, "Print one skill");
  inspect->add_option("--lineage", lineage_id, "Print a skill's ancestors");
  inspect->add_flag("--capsules", list_capsules);
  inspect->add_flag("--cost", cost, "Generator calls, episodes and wall clock");

  std::uint64_t seed = 1;
  auto* replay = app.add_subcommand("replay", "Run one episode and write its step log");
  replay->add_option("--method", method)->required();
  replay->add_option("--scenario", scenario)->required();
  replay->add_option("--seed", seed)->capture_default_str();
  replay->add_option("--log", out_path, "JSONL file (stdout when omitted)");

  auto* exp = app.add_subcommand("export", "Write fitness curves and capsule tables as CSV");
  exp->add_option("--run", run)->required();
  exp->add_option("--out", out_path, "Output directory (the run directory when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evolve) return cmd_evolve(ev);
    if (*evaluate) {
      if (skill_file.empty() && capsule.empty()) throw UsageError("evaluate needs --skill or --capsule");
      return cmd_evaluate(skill_file, capsule, run, event_aware, scenario, seeds, jobs, out_path);
    }
    if (*baseline) return cmd_baseline(method, scenario, seeds, jobs, out_path);
    if (*compare) return cmd_compare(methods, scenarios, seeds, jobs, out_path);
    if (*inspect) return cmd_inspect(run, skill_id, lineage_id, list_capsules, cost);
    if (*replay) return cmd_replay(method, scenario, seed, out_path);
    if (*exp) return cmd_export(run, out_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const dsl::InvalidSkill& e) {
    std::cerr << "error: invalid skill: stage=" << dsl::stage_name(e.report().stage) << ": " << e.report().message
              << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: configuration: " << e.what() << '\n';
    return 2;
  } catch (const GeneratorUnavailable& e) {
    std::cerr << "error: generator unavailable: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
