#include <benchmark/benchmark.h>

#include <memory>

#include "scoopsim/learning.hpp"
#include "scoopsim/perception.hpp"
#include "scoopsim/physics.hpp"
#include "scoopsim/primitive.hpp"
#include "scoopsim/worldmodel.hpp"

namespace {

using namespace scoopsim;

std::shared_ptr<const Catalog> shipped() {
  static auto c = std::make_shared<const Catalog>(load_catalog(default_catalog_path()));
  return c;
}

WorldState pushing_world(const std::string& food, int count) {
  ScenarioConfig cfg;
  cfg.items = {{food, count}};
  cfg.seed = 7;
  WorldState w = spawn_scenario(shipped(), cfg);
  const PrimitivePlan plan = plan_primitive(0.0);
  w.tools = start_tools(plan);
  w.advance_phase(Phase::Pushing);
  return w;
}

void BM_PhysicsStep(benchmark::State& state) {
  const WorldState w0 = pushing_world("pea", static_cast<int>(state.range(0)));
  for (auto _ : state) {
    WorldState w = simulate_step(w0);
    benchmark::DoNotOptimize(w.time);
  }
}
BENCHMARK(BM_PhysicsStep)->Arg(1)->Arg(3);

void BM_SideRender(benchmark::State& state) {
  const WorldState w = pushing_world("tofu", 1);
  for (auto _ : state) benchmark::DoNotOptimize(render_side(w));
}
BENCHMARK(BM_SideRender);

void BM_FailurePredict(benchmark::State& state) {
  const WorldState w = pushing_world("tofu", 1);
  const SideGrid g = render_side(w);
  BinaryClassifier m = BinaryClassifier::zeros(ModelKind::OneHiddenLayer);
  m.norm.mean.assign(kFeatureDim, 0.0);
  m.norm.stddev.assign(kFeatureDim, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(predict_grid(m, g));
}
BENCHMARK(BM_FailurePredict);

void BM_Rollout(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.items = {{"grape", 1}};
  cfg.seed = 3;
  for (auto _ : state) {
    WorldState w = spawn_scenario(shipped(), cfg);
    const RolloutRecord r = run_rollout(std::move(w), plan_primitive(0.0));
    benchmark::DoNotOptimize(r.realized_alpha);
  }
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
