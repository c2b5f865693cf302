#include <benchmark/benchmark.h>

#include <vector>

#include "dem/scenes.hpp"
#include "dem/shapes.hpp"
#include "dem/timestepping.hpp"

using namespace dem;

namespace {

void BM_BuildTree(benchmark::State& state) {
  auto mesh = generate_sphere_with_count(static_cast<int>(state.range(0)), Real(1.4), 1);
  mesh.scale(Real(0.5));
  const auto tris = mesh.triangles();
  for (auto _ : state) benchmark::DoNotOptimize(build_surrogate_tree(tris, 8, FitParams{}, 1));
}
BENCHMARK(BM_BuildTree)->Arg(80)->Arg(320)->Arg(1280)->Unit(benchmark::kMillisecond);

// Two particles overlapping by one halo width past first touch.
void detect(benchmark::State& state, bool multiscale) {
  SceneSpec spec;
  spec.triangle_count = static_cast<int>(state.range(0));
  spec.gap = 0;
  const System system = build_scene(spec);
  std::vector<RigidMotion> poses;
  for (const auto& p : system.particles) poses.push_back(p.pose);
  poses[1].translation.x() -= spec.epsilon;
  const StepConfig cfg;
  DetectionStats stats;
  std::size_t contacts = 0;
  for (auto _ : state) contacts = detect_pair(system, poses, 0, 1, multiscale, cfg, stats).size();
  state.counters["contacts"] = double(contacts);
  state.counters["checks"] = benchmark::Counter(double(stats.counters.checks()), benchmark::Counter::kAvgIterations);
}

void BM_DetectSingle(benchmark::State& state) { detect(state, false); }
void BM_DetectMultiscale(benchmark::State& state) { detect(state, true); }
BENCHMARK(BM_DetectSingle)->Arg(80)->Arg(320)->Arg(1224)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DetectMultiscale)->Arg(80)->Arg(320)->Arg(1224)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
