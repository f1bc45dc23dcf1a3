#include <benchmark/benchmark.h>

#include <random>

#include "listings.hpp"
#include "tsevo/control/control.hpp"
#include "tsevo/dsl/interpreter.hpp"
#include "tsevo/dsl/parser.hpp"
#include "tsevo/gen/generator.hpp"

using namespace tsevo;

namespace {

sim::ScenarioConfig desk(const std::string& family) {
  auto o = sim::desk_scale();
  return sim::make_scenario(family, o);
}

void BM_ParseGen19(benchmark::State& state) {
  const auto code = listings::gen19_full().inlane_code;
  for (auto _ : state) benchmark::DoNotOptimize(dsl::parse(code));
}
BENCHMARK(BM_ParseGen19);

void BM_EvaluateGen19(benchmark::State& state) {
  const auto ast = dsl::parse(listings::gen19_full().inlane_code);
  dsl::EvalContext ctx;
  ctx.bind("waiting", 6);
  ctx.bind("dist", 4);
  ctx.bind("vehicles", 8);
  for (auto _ : state) benchmark::DoNotOptimize(dsl::evaluate(ast, ctx));
}
BENCHMARK(BM_EvaluateGen19);

void BM_ScorePhases(benchmark::State& state) {
  const auto skill = dsl::compile_skill(listings::gen19_full(), dsl::VariableWhitelist::lane());
  sim::PhaseObservations obs{};
  for (auto& phase : obs) {
    for (auto& ll : phase) ll.inlane = {8, 5, 40.0};
  }
  for (auto _ : state) benchmark::DoNotOptimize(control::score_phases(skill, obs));
}
BENCHMARK(BM_ScorePhases);

void BM_ScriptedMutate(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto elite = listings::gen19_full();
  for (auto _ : state) benchmark::DoNotOptimize(gen::scripted_mutate(elite, false, rng));
}
BENCHMARK(BM_ScriptedMutate);

void BM_Episode(benchmark::State& state, control::ControllerKind kind, const char* family) {
  const auto sc = desk(family);
  const auto spec = kind == control::ControllerKind::skill ? control::ControllerSpec::for_skill(listings::gen19_full())
                                                           : control::ControllerSpec::baseline(kind);
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(control::drive(spec, sc, seed++).metrics.avg_delay);
}
BENCHMARK_CAPTURE(BM_Episode, max_pressure_T1, control::ControllerKind::max_pressure, "T1")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Episode, skill_T1, control::ControllerKind::skill, "T1")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Episode, preemption_E2, control::ControllerKind::handcrafted_preemption, "E2")
    ->Unit(benchmark::kMillisecond);

void BM_DispatcherEpisode(benchmark::State& state) {
  const auto sc = desk("M1");
  const auto spec = control::ControllerSpec::for_bank(events::default_bank());
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(control::drive(spec, sc, seed++).metrics.avg_delay);
}
BENCHMARK(BM_DispatcherEpisode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
