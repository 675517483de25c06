#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gmnn/index.hpp"

namespace {

std::vector<gmnn::Position> cloud(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<gmnn::Position> out(n);
  for (auto& p : out) p = {u(rng), u(rng), u(rng)};
  return out;
}

void knn_with(benchmark::State& state, gmnn::KnnMethod method) {
  const auto points = cloud(static_cast<std::size_t>(state.range(0)));
  const gmnn::KnnOptions options{method, true};
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmnn::knn(points, 64, options));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_KnnGrid(benchmark::State& state) { knn_with(state, gmnn::KnnMethod::kGrid); }
void BM_KnnBruteForce(benchmark::State& state) { knn_with(state, gmnn::KnnMethod::kBruteForce); }

void BM_Pyramid(benchmark::State& state) {
  const auto points = cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmnn::knn_pyramid(points, gmnn::kDefaultKSet));
  }
}

void BM_FarthestPointSample(benchmark::State& state) {
  const auto points = cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmnn::farthest_point_sample(points, points.size() / 4));
  }
}

}  // namespace

BENCHMARK(BM_KnnGrid)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KnnBruteForce)->RangeMultiplier(4)->Range(256, 4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pyramid)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FarthestPointSample)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
