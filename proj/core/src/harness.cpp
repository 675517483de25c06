#include "gmnn/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gmnn/error.hpp"

namespace gmnn {

std::vector<EventGraph> graphs_from_stream(const std::vector<Event>& stream, const WindowOptions& windows,
                                           const SensorGeometry& geometry) {
  std::vector<EventGraph> out;
  for (const auto& w : window_events(stream, windows)) {
    if (!w.empty()) out.push_back(build_graph(w, geometry));
  }
  return out;
}

std::vector<EventGraph> synthetic_dataset(SceneConfig scene, std::size_t count, std::uint64_t seed,
                                          const WindowOptions& windows) {
  if (count == 0) throw ConfigError("dataset needs at least one window");
  scene.duration = windows.duration * static_cast<Timestamp>(count);
  scene.validate();
  const auto stream = synth_scene(scene, seed);
  // Windows are anchored at t = 0 so an early gap cannot shift them.
  std::vector<EventGraph> out;
  for (std::size_t w = 0; w < count; ++w) {
    const Timestamp t0 = windows.duration * static_cast<Timestamp>(w);
    std::vector<Event> slice;
    for (const auto& e : stream) {
      if (e.t >= t0 && e.t < t0 + windows.duration) slice.push_back(e);
    }
    if (slice.size() > windows.max_events) {
      slice.erase(slice.begin(), slice.end() - static_cast<std::ptrdiff_t>(windows.max_events));
    }
    if (slice.empty()) continue;
    EventWindow window{std::move(slice), t0, windows.duration, false};
    out.push_back(build_graph(window, scene.geometry));
  }
  return out;
}

SceneConfig two_class_scene(const SensorGeometry& geometry, std::size_t events_per_window, Timestamp window) {
  SceneConfig s;
  s.geometry = geometry;
  s.motion.kind = MotionKind::kLinear;
  s.motion.speed = 100.0;
  s.motion.direction_deg = 30.0;
  SceneObject disc;
  disc.shape = Silhouette::kDisc;
  disc.class_id = 0;
  disc.center_x = geometry.width * 0.3;
  disc.center_y = geometry.height * 0.5;
  disc.radius = geometry.height * 0.18;
  SceneObject rect;
  rect.shape = Silhouette::kRectangle;
  rect.class_id = 1;
  rect.center_x = geometry.width * 0.68;
  rect.center_y = geometry.height * 0.45;
  rect.width = geometry.width * 0.25;
  rect.height = geometry.height * 0.35;
  s.objects = {disc, rect};
  s.duration = window;
  s.event_rate = static_cast<double>(events_per_window) / 2.0 /
                 (static_cast<double>(window) / static_cast<double>(1000 * kMicrosPerMilli));
  return s;
}

std::vector<AblationConfig> layer_count_configs(std::span<const std::size_t> layer_counts) {
  std::vector<AblationConfig> out;
  for (const std::size_t n : layer_counts) {
    if (n == 0) throw ConfigError("layer count must be positive");
    AblationConfig c{"layers", "L" + std::to_string(n), {}};
    for (std::size_t i = 1; i <= n; ++i) c.k_set.push_back(16 * i);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<AblationConfig> k_set_configs() {
  return {{"k_set", "Set 1", {3, 6, 9, 12}},
          {"k_set", "Set 2", {8, 16, 24, 32}},
          {"k_set", "Set 3", {16, 32, 48, 64}},
          {"k_set", "Set 4", {25, 50, 75, 100}},
          {"k_set", "Set 5", {40, 80, 160, 240}}};
}

std::vector<AblationRow> ablate_ccm(const AblationOptions& options, std::span<const AblationConfig> configs,
                                    std::span<const EventGraph> train_graphs,
                                    std::span<const EventGraph> test_graphs) {
  std::vector<AblationRow> rows;
  for (const auto& c : configs) {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig mc = options.base;
    mc.k_set = c.k_set;
    mc.level_weights = ramp_level_weights(c.k_set.size());
    ModelParams model = build_model(mc);
    const TrainResult tr = train(model, train_graphs, options.train);
    const MetricReport report = evaluate(model, test_graphs, options.boundary_radius);
    AblationRow row;
    row.config = c;
    row.level_weights = mc.level_weights;
    row.parameters = count_parameters(model);
    row.accuracy = report.accuracy;
    row.miou = report.iou.miou;
    row.final_loss = tr.loss_curve.empty() ? 0.0 : tr.loss_curve.back();
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json ablation_to_json(std::span<const AblationRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"group", r.config.group},
                   {"name", r.config.name},
                   {"k_set", r.config.k_set},
                   {"level_weights", r.level_weights},
                   {"parameters", r.parameters},
                   {"accuracy_percent", 100.0 * r.accuracy},
                   {"miou", r.miou},
                   {"final_loss", r.final_loss},
                   {"seconds", r.seconds}});
  }
  return out;
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::size_t columns = 0;
  for (const auto& r : rows) columns = std::max(columns, r.config.k_set.size());
  std::ostringstream out;
  out << "config";
  for (std::size_t i = 1; i <= columns; ++i) out << "\tL" << i;
  out << "\tACC%\n";
  for (const auto& r : rows) {
    out << r.config.name;
    for (std::size_t i = 0; i < columns; ++i) {
      out << '\t';
      if (i < r.config.k_set.size()) out << r.config.k_set[i];
      else out << '-';
    }
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.2f", 100.0 * r.accuracy);
    out << '\t' << acc << '\n';
  }
  return out.str();
}

TimingStats timing_stats(std::span<const double> samples) {
  TimingStats s;
  s.samples = samples.size();
  if (samples.empty()) return s;
  double sum = 0.0;
  for (const double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double sq = 0.0;
    for (const double v : samples) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(samples.size() - 1));
  }
  return s;
}

BenchReport bench_timing(const ModelParams& model, std::span<const EventGraph> graphs, const BenchOptions& options) {
  if (graphs.empty()) throw ConfigError("bench needs at least one graph");
  if (options.repetitions == 0) throw ConfigError("bench needs at least one repetition");
  using clock = std::chrono::steady_clock;
  const HierarchyOptions h_options = model.config.hierarchy_options();

  BenchReport report;
  report.graphs = graphs.size();
  report.repetitions = options.repetitions;
  report.slack = options.slack;
  for (const auto& g : graphs) report.graph_sizes.push_back(g.size());

  std::vector<double> sequential, batch;
  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    for (const auto& g : graphs) {
      const auto start = clock::now();
      const SegmentationResult r = gmnn_forward(model, g);
      sequential.push_back(std::chrono::duration<double>(clock::now() - start).count());
      if (r.logits.rows() != g.size()) throw StructuralError("bench: wrong logit count");
    }

    const auto start = clock::now();
    std::vector<GraphHierarchy> parts;
    parts.reserve(graphs.size());
    for (const auto& g : graphs) parts.push_back(build_hierarchy(g, h_options));
    std::vector<const GraphHierarchy*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    const GraphHierarchy merged = merge_hierarchies(ptrs);
    Tape t(false);
    const Matrix& logits = t.value(forward_hierarchy(t, model, merged));
    check_finite(logits, "logits");
    batch.push_back(std::chrono::duration<double>(clock::now() - start).count());
  }
  report.sequential_per_graph = timing_stats(sequential);
  report.batch_total = timing_stats(batch);
  report.batch_per_graph = report.batch_total.mean / static_cast<double>(graphs.size());
  report.batch_within_slack = report.batch_per_graph <= (1.0 + options.slack) * report.sequential_per_graph.mean;
  return report;
}

nlohmann::json bench_to_json(const BenchReport& r) {
  auto stats = [](const TimingStats& s) {
    return nlohmann::json{{"mean_s", s.mean}, {"stddev_s", s.stddev}, {"samples", s.samples}};
  };
  return {{"graphs", r.graphs},
          {"repetitions", r.repetitions},
          {"graph_sizes", r.graph_sizes},
          {"sequential_per_graph", stats(r.sequential_per_graph)},
          {"batch_total", stats(r.batch_total)},
          {"batch_per_graph_s", r.batch_per_graph},
          {"slack", r.slack},
          {"batch_within_slack", r.batch_within_slack}};
}

}  // namespace gmnn
