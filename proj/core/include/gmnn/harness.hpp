#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gmnn/events.hpp"
#include "gmnn/graph.hpp"
#include "gmnn/model.hpp"
#include "gmnn/scene.hpp"
#include "gmnn/train.hpp"

namespace gmnn {

// Windows of `stream` turned into graphs; empty windows are skipped.
std::vector<EventGraph> graphs_from_stream(const std::vector<Event>& stream, const WindowOptions& windows,
                                           const SensorGeometry& geometry);

// Synthesizes `count` windows of the scene back to back and slices them.
std::vector<EventGraph> synthetic_dataset(SceneConfig scene, std::size_t count, std::uint64_t seed,
                                          const WindowOptions& windows);

// Two silhouettes, classes 0 and 1, about `events_per_window` events per window.
SceneConfig two_class_scene(const SensorGeometry& geometry, std::size_t events_per_window,
                            Timestamp window = 100 * kMicrosPerMilli);

struct AblationConfig {
  std::string group;  // "layers" or "k_set"
  std::string name;
  std::vector<std::size_t> k_set;
};

// k sets 16, 16 32, ... with `count` levels each, for count in `layer_counts`.
std::vector<AblationConfig> layer_count_configs(std::span<const std::size_t> layer_counts);
// The five four-level k sets of the k-set study.
std::vector<AblationConfig> k_set_configs();

struct AblationRow {
  AblationConfig config;
  std::vector<double> level_weights;
  std::size_t parameters = 0;
  double accuracy = 0.0;
  double miou = 0.0;
  double final_loss = 0.0;
  double seconds = 0.0;
};

struct AblationOptions {
  ModelConfig base;
  TrainConfig train;
  double boundary_radius = 2.0 / 346.0;
};

std::vector<AblationRow> ablate_ccm(const AblationOptions& options, std::span<const AblationConfig> configs,
                                    std::span<const EventGraph> train_graphs, std::span<const EventGraph> test_graphs);

nlohmann::json ablation_to_json(std::span<const AblationRow> rows);
std::string ablation_table(std::span<const AblationRow> rows);

struct BenchOptions {
  std::size_t repetitions = 10;
  double slack = 0.10;
};

struct TimingStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t samples = 0;
};

TimingStats timing_stats(std::span<const double> samples);

struct BenchReport {
  std::size_t graphs = 0;
  std::size_t repetitions = 0;
  std::vector<std::size_t> graph_sizes;
  TimingStats sequential_per_graph;  // seconds per forward pass
  TimingStats batch_total;           // seconds per grouped pass
  double batch_per_graph = 0.0;
  double slack = 0.0;
  bool batch_within_slack = false;
};

BenchReport bench_timing(const ModelParams& model, std::span<const EventGraph> graphs, const BenchOptions& options);
nlohmann::json bench_to_json(const BenchReport& report);

}  // namespace gmnn
