#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gmnn/checkpoint.hpp"
#include "gmnn/error.hpp"
#include "gmnn/events.hpp"
#include "gmnn/graph.hpp"
#include "gmnn/harness.hpp"
#include "gmnn/index.hpp"
#include "gmnn/metrics.hpp"
#include "gmnn/model.hpp"
#include "gmnn/scene.hpp"
#include "gmnn/train.hpp"

#ifndef GMNN_VERSION
#define GMNN_VERSION "unknown"
#endif

namespace {

using nlohmann::json;
using namespace gmnn;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("failed to write " + path);
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string file_digest(const std::string& path) { return hex_digest(fnv1a64(read_text(path))); }

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  auto number = [&](std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("not a count: '" + std::string(s) + "'");
    return v;
  };
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto dots = item.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(number(item));
    } else {
      const std::size_t lo = number(item.substr(0, dots)), hi = number(item.substr(dots + 2));
      if (lo > hi) throw ConfigError("empty range '" + std::string(item) + "'");
      for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
    }
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

// Options shared by every subcommand that reads an event file.
struct StreamArgs {
  std::string events;
  bool has_header = false;
  double window_ms = 100.0;
  double stride_ms = 0.0;
  std::size_t n_max = 10000;
  int width = 346;
  int height = 260;

  void add(CLI::App* app, bool require_events) {
    auto* opt = app->add_option("--events", events, "Event file (x,y,t_us,polarity[,label])");
    if (require_events) opt->required();
    app->add_flag("--has-header", has_header, "First non-comment line is a header");
    app->add_option("--window-ms", window_ms, "Window duration T in milliseconds")->capture_default_str();
    app->add_option("--stride-ms", stride_ms, "Window stride in milliseconds (0 = tumbling)")->capture_default_str();
    app->add_option("--n-max", n_max, "Most recent events kept per window")->capture_default_str();
    app->add_option("--width", width, "Sensor width X in pixels")->capture_default_str();
    app->add_option("--height", height, "Sensor height Y in pixels")->capture_default_str();
  }

  SensorGeometry geometry() const {
    SensorGeometry g{width, height};
    g.validate();
    return g;
  }

  WindowOptions windows() const {
    if (!(window_ms > 0.0)) throw ConfigError("--window-ms must be positive");
    if (stride_ms < 0.0) throw ConfigError("--stride-ms must be non-negative");
    if (n_max == 0) throw ConfigError("--n-max must be positive");
    WindowOptions w;
    w.duration = static_cast<Timestamp>(window_ms * 1000.0);
    w.stride = static_cast<Timestamp>(stride_ms * 1000.0);
    w.max_events = n_max;
    if (w.duration <= 0) throw ConfigError("--window-ms is below one microsecond");
    return w;
  }

  std::vector<EventGraph> load_graphs() const {
    const auto geo = geometry();
    const auto stream = read_event_file(events, geo, ParseOptions{has_header});
    return graphs_from_stream(stream, windows(), geo);
  }

  json to_json() const {
    return {{"events", events},   {"has_header", has_header}, {"window_ms", window_ms}, {"stride_ms", stride_ms},
            {"n_max", n_max},     {"width", width},           {"height", height}};
  }
};

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void config(json c) { config_ = std::move(c); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void input(const std::string& path) {
    if (!path.empty()) inputs_.push_back({{"path", path}, {"fnv1a64", file_digest(path)}});
  }
  void artifact(const std::string& path) {
    if (!path.empty()) artifacts_.push_back(path);
  }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const std::string& path) const {
    json m{{"command", command_},   {"tool_version", GMNN_VERSION}, {"config", config_},
           {"seeds", seeds_},       {"inputs", inputs_},            {"artifacts", artifacts_}};
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    write_text(path, m.dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_ = json::object();
  json seeds_ = json::object();
  json inputs_ = json::array();
  json artifacts_ = json::array();
  json extra_ = json::object();
};

std::string manifest_path(const std::string& requested, const std::string& primary, const std::string& command) {
  if (!requested.empty()) return requested;
  if (!primary.empty()) return primary + ".manifest.json";
  return "gmnn-" + command + ".manifest.json";
}

ModelConfig load_model_config(const std::string& path) {
  return path.empty() ? ModelConfig{} : parse_model_config(read_json(path));
}

// Flags given on the command line win over values in a --config file.
template <class T>
void from_config(const json& cfg, const char* key, const CLI::App* app, const char* flag, T& value) {
  if (cfg.contains(key) && app->count(flag) == 0) {
    try {
      value = cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key ") + key + ": " + e.what());
    }
  }
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Forward passes over graphs split across `workers` threads; model is shared read-only.
std::vector<SegmentationResult> segment_all(const ModelParams& model, const std::vector<EventGraph>& graphs,
                                            std::size_t workers) {
  std::vector<SegmentationResult> out(graphs.size());
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < graphs.size(); i += workers) out[i] = gmnn_forward(model, graphs[i]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  std::string scene;
  std::size_t objects = 2;
  std::string motion = "linear";
  std::uint64_t seed = 1;
  double duration_ms = 1000.0;
  double event_rate = 20000.0;
  double noise_rate = 0.0;
  double speed = 200.0;
  int width = 346;
  int height = 260;
  std::string manifest;
};

int run_synth(const SynthArgs& a, const CLI::App* app) {
  SceneConfig scene;
  if (!a.scene.empty()) {
    scene = parse_scene_config(read_text(a.scene));
  } else {
    scene = default_scene(a.objects, parse_motion_kind(a.motion), SensorGeometry{a.width, a.height});
  }
  if (a.scene.empty() || app->count("--duration-ms")) scene.duration = static_cast<Timestamp>(a.duration_ms * 1000.0);
  if (a.scene.empty() || app->count("--event-rate")) scene.event_rate = a.event_rate;
  if (a.scene.empty() || app->count("--noise-rate")) scene.noise_rate = a.noise_rate;
  if (a.scene.empty() || app->count("--speed")) scene.motion.speed = a.speed;
  scene.validate();

  const auto events = synth_scene(scene, a.seed);
  write_event_file(a.out, events);

  std::map<ClassId, std::size_t> counts;
  for (const auto& e : events) ++counts[e.label.value_or(-1)];
  std::printf("wrote %zu events to %s\n", events.size(), a.out.c_str());
  json stats = json::object();
  for (const auto& [c, n] : counts) {
    std::printf("class %d: %zu\n", c, n);
    stats[std::to_string(c)] = n;
  }

  Manifest m("synth");
  m.config(json::parse(scene_config_to_json(scene)));
  m.seed("scene", a.seed);
  m.input(a.scene);
  m.artifact(a.out);
  m.extra("class_counts", stats);
  m.extra("output_fnv1a64", file_digest(a.out));
  m.write(manifest_path(a.manifest, a.out, "synth"));
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  StreamArgs stream;
  std::string model_config;
  std::string config;
  std::string out = "model.gmnn";
  std::string loss_curve;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  std::size_t batch = 4;
  std::size_t subsets = 1;
  std::size_t iterations = 100;
  std::size_t epochs = 0;
  std::uint64_t seed = 1;
  std::string manifest;
};

int run_train(TrainArgs a, const CLI::App* app) {
  if (!a.config.empty()) {
    const json cfg = read_json(a.config);
    from_config(cfg, "lr", app, "--lr", a.lr);
    from_config(cfg, "momentum", app, "--momentum", a.momentum);
    from_config(cfg, "weight_decay", app, "--weight-decay", a.weight_decay);
    from_config(cfg, "batch", app, "--batch", a.batch);
    from_config(cfg, "subsets", app, "--subsets", a.subsets);
    from_config(cfg, "iterations", app, "--iterations", a.iterations);
    from_config(cfg, "epochs", app, "--epochs", a.epochs);
    from_config(cfg, "seed", app, "--seed", a.seed);
  }
  const ModelConfig mc = load_model_config(a.model_config);
  const auto graphs = a.stream.load_graphs();
  if (graphs.empty()) throw DataError("no events to train on");
  for (const auto& g : graphs) {
    if (!g.has_labels()) throw LabelError("training requires a labeled event file");
  }

  TrainConfig tc;
  tc.sgd = {a.lr, a.momentum, a.weight_decay};
  tc.batch = a.batch;
  tc.subsets = a.subsets;
  tc.iterations = a.epochs > 0 ? a.epochs * a.subsets : a.iterations;
  tc.seed = a.seed;

  ModelParams model = build_model(mc);
  std::printf("training on %zu graphs, %zu parameters\n", graphs.size(), count_parameters(model));
  const TrainResult result = train(model, graphs, tc, [](const IterationStats& s, const ModelParams&) {
    std::printf("iteration %zu subset %zu loss %.6f\n", s.iteration, s.subset, s.loss);
    std::fflush(stdout);
    return true;
  });
  save_checkpoint(a.out, model);

  const std::string curve = a.loss_curve.empty() ? a.out + ".loss.txt" : a.loss_curve;
  std::ostringstream text;
  text.precision(17);
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) text << i << ' ' << result.loss_curve[i] << '\n';
  write_text(curve, text.str());

  Manifest m("train");
  m.config({{"stream", a.stream.to_json()},
            {"model", model_config_to_json(mc)},
            {"train",
             {{"lr", a.lr},
              {"momentum", a.momentum},
              {"weight_decay", a.weight_decay},
              {"batch", a.batch},
              {"subsets", a.subsets},
              {"iterations", tc.iterations}}}});
  m.seed("model", mc.seed);
  m.seed("train", a.seed);
  m.input(a.stream.events);
  m.input(a.model_config);
  m.input(a.config);
  m.artifact(a.out);
  m.artifact(curve);
  m.extra("config_digest", hex_digest(config_digest(mc)));
  m.extra("final_loss", result.loss_curve.empty() ? 0.0 : result.loss_curve.back());
  m.write(manifest_path(a.manifest, a.out, "train"));
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  StreamArgs stream;
  std::string checkpoint;
  std::string report = "report.json";
  double boundary_radius_px = 2.0;
  std::size_t workers = 0;
  std::string manifest;
};

int run_eval(const EvalArgs& a) {
  const ModelParams model = load_checkpoint(a.checkpoint);
  const auto graphs = a.stream.load_graphs();
  if (graphs.empty()) throw DataError("no events to evaluate");
  for (const auto& g : graphs) {
    if (!g.has_labels()) throw LabelError("evaluation requires a labeled event file");
  }
  if (!(a.boundary_radius_px > 0.0)) throw ConfigError("--boundary-radius-px must be positive");
  const double radius = a.boundary_radius_px / static_cast<double>(a.stream.width);
  const std::size_t workers = a.workers == 0 ? default_workers() : a.workers;

  const auto results = segment_all(model, graphs, workers);
  MetricAccumulator acc(model.config.classes, radius);
  for (std::size_t i = 0; i < graphs.size(); ++i) acc.add(results[i].labels, graphs[i].labels, graphs[i]);
  const MetricReport report = acc.report();
  json j = metric_report_to_json(report);
  j["boundary"]["radius_px"] = a.boundary_radius_px;
  j["graphs"] = graphs.size();
  write_text(a.report, j.dump(2) + "\n");

  std::printf("events %zu  accuracy %.4f  mIoU %.4f  count-ratio %.4f  boundary FP %.2f%%\n", report.events,
              report.accuracy, report.iou.miou, report.count_ratio, report.boundary.boundary_fp_percent);

  Manifest m("eval");
  m.config({{"stream", a.stream.to_json()}, {"boundary_radius_px", a.boundary_radius_px}, {"workers", workers}});
  m.input(a.checkpoint);
  m.input(a.stream.events);
  m.artifact(a.report);
  m.write(manifest_path(a.manifest, a.report, "eval"));
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string model_config;
  std::string layers = "1..7";
  bool skip_k_sets = false;
  std::size_t graphs = 8;
  std::size_t objects = 3;
  std::size_t events_per_window = 300;
  std::size_t iterations = 20;
  std::size_t batch = 4;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  std::uint64_t seed = 1;
  std::string out = "ablation.json";
  std::string manifest;
};

SceneConfig benchmark_scene(std::size_t objects, std::size_t events_per_window, const SensorGeometry& geo,
                            Timestamp window) {
  SceneConfig scene = default_scene(objects, MotionKind::kRotational, geo);
  const double seconds = static_cast<double>(window) / 1e6;
  scene.event_rate = static_cast<double>(events_per_window) / (static_cast<double>(objects) + 0.5) / seconds;
  scene.noise_rate = 0.5 * scene.event_rate;
  return scene;
}

int run_ablate(const AblateArgs& a) {
  AblationOptions options;
  options.base = load_model_config(a.model_config);
  options.train.sgd = {a.lr, a.momentum, a.weight_decay};
  options.train.batch = a.batch;
  options.train.iterations = a.iterations;
  options.train.seed = a.seed;
  if (a.objects + 1 > options.base.classes) throw ConfigError("more scene classes than model classes");

  const SensorGeometry geo;
  WindowOptions w;
  const SceneConfig scene = benchmark_scene(a.objects, a.events_per_window, geo, w.duration);
  const auto train_graphs = synthetic_dataset(scene, a.graphs, a.seed, w);
  const auto test_graphs = synthetic_dataset(scene, std::max<std::size_t>(2, a.graphs / 2), a.seed + 1000, w);

  std::vector<AblationConfig> configs = layer_count_configs(parse_index_list(a.layers));
  if (!a.skip_k_sets) {
    for (auto& c : k_set_configs()) configs.push_back(std::move(c));
  }
  const auto rows = ablate_ccm(options, configs, train_graphs, test_graphs);
  write_text(a.out, json{{"rows", ablation_to_json(rows)}}.dump(2) + "\n");
  std::fputs(ablation_table(rows).c_str(), stdout);

  Manifest m("ablate");
  m.config({{"model", model_config_to_json(options.base)},
            {"layers", a.layers},
            {"k_sets", !a.skip_k_sets},
            {"graphs", a.graphs},
            {"objects", a.objects},
            {"events_per_window", a.events_per_window},
            {"iterations", a.iterations},
            {"batch", a.batch},
            {"lr", a.lr},
            {"momentum", a.momentum},
            {"weight_decay", a.weight_decay}});
  m.seed("data", a.seed);
  m.seed("model", options.base.seed);
  m.input(a.model_config);
  m.artifact(a.out);
  m.write(manifest_path(a.manifest, a.out, "ablate"));
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string checkpoint;
  std::string model_config;
  std::string events;
  std::size_t graphs = 40;
  double graph_ms = 10.0;
  std::size_t repetitions = 10;
  std::size_t objects = 2;
  double event_rate = 20000.0;
  double slack = 0.10;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  std::string out = "bench.json";
  std::string manifest;
};

int run_bench(const BenchArgs& a) {
  if (a.workers != 1) throw ConfigError("sequential timing is defined for one worker");
  const ModelParams model =
      a.checkpoint.empty() ? build_model(load_model_config(a.model_config)) : load_checkpoint(a.checkpoint);
  WindowOptions w;
  w.duration = static_cast<Timestamp>(a.graph_ms * 1000.0);
  if (w.duration <= 0) throw ConfigError("--graph-ms must be positive");

  std::vector<EventGraph> graphs;
  const SensorGeometry geo;
  if (!a.events.empty()) {
    graphs = graphs_from_stream(read_event_file(a.events, geo), w, geo);
  } else {
    SceneConfig scene = default_scene(a.objects, MotionKind::kRotational, geo);
    scene.event_rate = a.event_rate;
    graphs = synthetic_dataset(scene, a.graphs, a.seed, w);
  }
  if (graphs.size() > a.graphs) graphs.resize(a.graphs);
  if (graphs.empty()) throw DataError("no graphs to time");

  const BenchReport report = bench_timing(model, graphs, BenchOptions{a.repetitions, a.slack});
  json j = bench_to_json(report);
  j["graph_ms"] = a.graph_ms;
  write_text(a.out, j.dump(2) + "\n");
  std::printf("graphs %zu x %.1f ms, %zu repetitions\n", report.graphs, a.graph_ms, report.repetitions);
  std::printf("sequential: %.6f +- %.6f s per graph\n", report.sequential_per_graph.mean,
              report.sequential_per_graph.stddev);
  std::printf("batch:      %.6f +- %.6f s per batch (%.6f s per graph)\n", report.batch_total.mean,
              report.batch_total.stddev, report.batch_per_graph);
  std::printf("batch within %.0f%% of sequential: %s\n", 100.0 * a.slack, report.batch_within_slack ? "yes" : "no");

  Manifest m("bench");
  m.config({{"model", model_config_to_json(model.config)},
            {"graphs", a.graphs},
            {"graph_ms", a.graph_ms},
            {"repetitions", a.repetitions},
            {"objects", a.objects},
            {"event_rate", a.event_rate},
            {"slack", a.slack},
            {"workers", a.workers}});
  m.seed("data", a.seed);
  m.input(a.checkpoint);
  m.input(a.model_config);
  m.input(a.events);
  m.artifact(a.out);
  m.write(manifest_path(a.manifest, a.out, "bench"));
  return kExitOk;
}

// ---------------------------------------------------------------- graph

struct GraphArgs {
  StreamArgs stream;
  std::size_t window = 0;
  std::string k_set = "16,32,48,64";
  std::string out;
  std::string manifest;
};

int run_graph(const GraphArgs& a) {
  const auto geo = a.stream.geometry();
  const auto stream = read_event_file(a.stream.events, geo, ParseOptions{a.stream.has_header});
  const auto windows = window_events(stream, a.stream.windows());
  if (a.window >= windows.size()) {
    throw ConfigError("window " + std::to_string(a.window) + " out of range (" + std::to_string(windows.size()) +
                      " windows)");
  }
  const EventGraph graph = build_graph(windows[a.window], geo);
  const auto k_set = parse_index_list(a.k_set);
  const std::string dump = format_graph_dump(graph, knn_pyramid(graph.positions, k_set));
  if (a.out.empty()) {
    std::fputs(dump.c_str(), stdout);
  } else {
    write_text(a.out, dump);
  }

  Manifest m("graph");
  m.config({{"stream", a.stream.to_json()}, {"window", a.window}, {"k_set", k_set}});
  m.input(a.stream.events);
  m.artifact(a.out);
  m.write(manifest_path(a.manifest, a.out, "graph"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-based semantic segmentation with graph mixing networks"};
  app.set_version_flag("--version", GMNN_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic labeled event stream");
  synth_cmd->add_option("--out", synth.out, "Output event file")->required();
  synth_cmd->add_option("--scene", synth.scene, "Scene config (JSON)");
  synth_cmd->add_option("--objects", synth.objects, "Objects in the default scene")->capture_default_str();
  synth_cmd->add_option("--motion", synth.motion, "linear | rotational | partial")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--duration-ms", synth.duration_ms, "Stream length in milliseconds")->capture_default_str();
  synth_cmd->add_option("--event-rate", synth.event_rate, "Contour events per second per object")
      ->capture_default_str();
  synth_cmd->add_option("--noise-rate", synth.noise_rate, "Background events per second")->capture_default_str();
  synth_cmd->add_option("--speed", synth.speed, "Apparent speed in pixels per second")->capture_default_str();
  synth_cmd->add_option("--width", synth.width, "Sensor width X")->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "Sensor height Y")->capture_default_str();
  synth_cmd->add_option("--manifest", synth.manifest, "Manifest path (default <out>.manifest.json)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a labeled event file");
  tr.stream.add(train_cmd, true);
  train_cmd->add_option("--model-config", tr.model_config, "Model config (JSON)");
  train_cmd->add_option("--config", tr.config, "Training config (JSON); flags win");
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--loss-curve", tr.loss_curve, "Loss curve path (default <out>.loss.txt)");
  train_cmd->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", tr.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.weight_decay, "Weight decay")->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "Graphs per batch")->capture_default_str();
  train_cmd->add_option("--subsets", tr.subsets, "Training subsets L")->capture_default_str();
  train_cmd->add_option("--iterations", tr.iterations, "Iterations (one subset pass each)")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Full passes over the data; overrides --iterations");
  train_cmd->add_option("--seed", tr.seed, "Shuffle seed")->capture_default_str();
  train_cmd->add_option("--manifest", tr.manifest, "Manifest path (default <out>.manifest.json)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled event file");
  ev.stream.add(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("--report", ev.report, "Metric report path (JSON)")->capture_default_str();
  eval_cmd->add_option("--boundary-radius-px", ev.boundary_radius_px, "Boundary radius in pixels")
      ->capture_default_str();
  eval_cmd->add_option("--workers", ev.workers, "Evaluation threads (0 = all cores)")->capture_default_str();
  eval_cmd->add_option("--manifest", ev.manifest, "Manifest path (default <report>.manifest.json)");

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Layer-count and k-set study on a synthetic benchmark");
  ablate_cmd->add_option("--model-config", ab.model_config, "Base model config (JSON)");
  ablate_cmd->add_option("--layers", ab.layers, "Layer counts, e.g. 1..7 or 1,4")->capture_default_str();
  ablate_cmd->add_flag("--no-k-sets", ab.skip_k_sets, "Skip the five four-level k sets");
  ablate_cmd->add_option("--graphs", ab.graphs, "Training windows")->capture_default_str();
  ablate_cmd->add_option("--objects", ab.objects, "Objects in the benchmark scene")->capture_default_str();
  ablate_cmd->add_option("--events-per-window", ab.events_per_window, "Approximate events per window")
      ->capture_default_str();
  ablate_cmd->add_option("--iterations", ab.iterations, "Training iterations per configuration")
      ->capture_default_str();
  ablate_cmd->add_option("--batch", ab.batch, "Graphs per batch")->capture_default_str();
  ablate_cmd->add_option("--lr", ab.lr, "Learning rate")->capture_default_str();
  ablate_cmd->add_option("--momentum", ab.momentum, "SGD momentum")->capture_default_str();
  ablate_cmd->add_option("--weight-decay", ab.weight_decay, "Weight decay")->capture_default_str();
  ablate_cmd->add_option("--seed", ab.seed, "Data and shuffle seed")->capture_default_str();
  ablate_cmd->add_option("--out", ab.out, "Ablation table (JSON)")->capture_default_str();
  ablate_cmd->add_option("--manifest", ab.manifest, "Manifest path (default <out>.manifest.json)");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Sequential versus batch forward timing");
  bench_cmd->add_option("--checkpoint", be.checkpoint, "Checkpoint (default: fresh model)");
  bench_cmd->add_option("--model-config", be.model_config, "Model config when no checkpoint is given");
  bench_cmd->add_option("--events", be.events, "Event file (default: synthetic scene)");
  bench_cmd->add_option("--graphs", be.graphs, "Graphs per run")->capture_default_str();
  bench_cmd->add_option("--graph-ms", be.graph_ms, "Window per graph in milliseconds")->capture_default_str();
  bench_cmd->add_option("--repetitions", be.repetitions, "Timed repetitions")->capture_default_str();
  bench_cmd->add_option("--objects", be.objects, "Objects in the synthetic scene")->capture_default_str();
  bench_cmd->add_option("--event-rate", be.event_rate, "Contour events per second per object")
      ->capture_default_str();
  bench_cmd->add_option("--slack", be.slack, "Allowed batch overhead per graph")->capture_default_str();
  bench_cmd->add_option("--workers", be.workers, "Worker threads (sequential timing needs 1)")
      ->capture_default_str();
  bench_cmd->add_option("--seed", be.seed, "Scene seed")->capture_default_str();
  bench_cmd->add_option("--out", be.out, "Timing report (JSON)")->capture_default_str();
  bench_cmd->add_option("--manifest", be.manifest, "Manifest path (default <out>.manifest.json)");

  GraphArgs gr;
  auto* graph_cmd = app.add_subcommand("graph", "Dump one window's nodes and kNN rows");
  gr.stream.add(graph_cmd, true);
  graph_cmd->add_option("--window", gr.window, "Window index")->capture_default_str();
  graph_cmd->add_option("--k-set", gr.k_set, "Comma separated k values")->capture_default_str();
  graph_cmd->add_option("--out", gr.out, "Output file (default stdout)");
  graph_cmd->add_option("--manifest", gr.manifest, "Manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth_cmd) return run_synth(synth, synth_cmd);
    if (*train_cmd) return run_train(tr, train_cmd);
    if (*eval_cmd) return run_eval(ev);
    if (*ablate_cmd) return run_ablate(ab);
    if (*bench_cmd) return run_bench(be);
    if (*graph_cmd) return run_graph(gr);
  } catch (const gmnn::Error& e) {
    std::fprintf(stderr, "gmnn: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gmnn: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
