#include <benchmark/benchmark.h>

#include <vector>

#include "gmnn/harness.hpp"

namespace {

// Rotating two-object scene cut into windows of the requested length.
std::vector<gmnn::EventGraph> windows(std::size_t count, gmnn::Timestamp duration_us) {
  const gmnn::SensorGeometry geo;
  gmnn::SceneConfig scene = gmnn::default_scene(2, gmnn::MotionKind::kRotational, geo);
  scene.event_rate = 20000.0;
  gmnn::WindowOptions w;
  w.duration = duration_us;
  return gmnn::synthetic_dataset(scene, count, 3, w);
}

void BM_ForwardSingle(benchmark::State& state) {
  const auto graphs = windows(1, state.range(0) * 1000);
  const gmnn::ModelParams model = gmnn::build_model(gmnn::ModelConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmnn::gmnn_forward(model, graphs.front()));
  }
  state.counters["events"] = static_cast<double>(graphs.front().size());
}

void BM_TrainStep(benchmark::State& state) {
  const gmnn::ModelConfig config;
  gmnn::ModelParams model = gmnn::build_model(config);
  const auto graphs = windows(4, 10000);
  std::vector<gmnn::PreparedGraph> prepared;
  for (const auto& g : graphs) prepared.push_back(gmnn::prepare_graph(config, g));
  std::vector<const gmnn::PreparedGraph*> batch;
  for (const auto& p : prepared) batch.push_back(&p);
  gmnn::SgdState sgd;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmnn::train_step(model, batch, sgd));
  }
}

void BM_BuildHierarchy(benchmark::State& state) {
  const auto graphs = windows(1, state.range(0) * 1000);
  const auto options = gmnn::ModelConfig{}.hierarchy_options();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gmnn::build_hierarchy(graphs.front(), options));
  }
}

}  // namespace

BENCHMARK(BM_ForwardSingle)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildHierarchy)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
