#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dem/distance.hpp"

using namespace dem;

namespace {

Triangle random_triangle(std::mt19937_64& rng, const Vec3& c) {
  std::uniform_real_distribution<Real> u(-0.1, 0.1);
  auto v = [&]() -> Vec3 { return c + Vec3(u(rng), u(rng), u(rng)); };
  return {v(), v(), v()};
}

// Pairs with centre distances spread over [0, 0.25]; roughly a third are
// within the default contact distance.
std::vector<TrianglePair> make_pairs(std::size_t n) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<Real> gap(0, 0.25);
  std::normal_distribution<Real> g;
  std::vector<TrianglePair> pairs;
  while (pairs.size() < n) {
    const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
    TrianglePair p{random_triangle(rng, Vec3::Zero()), random_triangle(rng, gap(rng) * axis)};
    if (p.a.area() > 1e-4 && p.b.area() > 1e-4) pairs.push_back(p);
  }
  return pairs;
}

const std::vector<TrianglePair>& pairs() {
  static const auto p = make_pairs(4096);
  return p;
}

void BM_Comparison(benchmark::State& state) {
  const KernelParams p;
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& q = pairs()[k++ % pairs().size()];
    benchmark::DoNotOptimize(closest_comparison(q.a, q.b, p));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Comparison);

void BM_Iterative(benchmark::State& state) {
  const KernelParams p;
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& q = pairs()[k++ % pairs().size()];
    benchmark::DoNotOptimize(closest_iterative(q.a, q.b, p));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Iterative);

void BM_Hybrid(benchmark::State& state) {
  const KernelParams p;
  KernelCounters counters;
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& q = pairs()[k++ % pairs().size()];
    benchmark::DoNotOptimize(closest_hybrid(q.a, q.b, p, counters));
  }
  state.SetItemsProcessed(state.iterations());
  state.counters["fallback_rate"] =
      double(counters.fallback_invocations) / double(std::max<std::uint64_t>(1, counters.iterative_invocations));
}
BENCHMARK(BM_Hybrid);

void BM_Batch(benchmark::State& state) {
  const KernelParams p;
  KernelCounters counters;
  for (auto _ : state) benchmark::DoNotOptimize(batch_closest(pairs(), p, counters));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs().size()));
}
BENCHMARK(BM_Batch)->Unit(benchmark::kMicrosecond);

}  // namespace
