#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "gmnn/error.hpp"
#include "gmnn/harness.hpp"
#include "gmnn/loss.hpp"
#include "gmnn/metrics.hpp"
#include "gmnn/train.hpp"
#include "oracles.hpp"

namespace gmnn {
namespace {

using testing::random_matrix;
using testing::random_positions;

std::vector<Label> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t classes) {
  std::vector<Label> v(n);
  for (auto& l : v) l = static_cast<Label>(rng() % classes);
  return v;
}

// ---------------------------------------------------------------- loss

TEST(Loss, UniformLogitsGiveLogC) {
  for (const std::size_t c : {2u, 10u, 17u}) {
    const Matrix logits(5, c, 0.37);
    const std::vector<Label> labels{0, 1, 1, 0, 1};
    EXPECT_NEAR(cross_entropy_loss(logits, labels).loss, std::log(double(c)), 1e-12);
  }
}

TEST(Loss, ConfidentCorrectLogitsApproachZero) {
  Matrix logits(3, 4);
  const std::vector<Label> labels{2, 0, 3};
  for (std::size_t i = 0; i < 3; ++i) logits(i, labels[i]) = 1e3;
  EXPECT_LT(cross_entropy_loss(logits, labels).loss, 1e-300);
}

TEST(Loss, MatchesPerEventFormulaAndGradient) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix logits = random_matrix(rng, 5, 4, 3.0);
    const std::vector<Label> labels = random_labels(rng, 5, 4);
    double direct = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < 4; ++c) z += std::exp(logits(i, c));
      direct += -std::log(std::exp(logits(i, labels[i])) / z) / 5.0;
    }
    const LossResult r = cross_entropy_loss(logits, labels);
    EXPECT_NEAR(r.loss, direct, 1e-13);
    const Matrix numeric = testing::numeric_gradient([&] { return cross_entropy_loss(logits, labels).loss; }, logits, 1e-5);
    EXPECT_LT(testing::max_abs_diff(testing::to_dense(numeric), r.grad), 1e-9);
  }
}

TEST(Loss, BatchAveragesPerGraphMeans) {
  std::mt19937_64 rng(2);
  const Matrix logits = random_matrix(rng, 7, 3);
  const std::vector<Label> labels = random_labels(rng, 7, 3);
  const std::vector<std::size_t> offsets{0, 2, 7};
  auto part = [&](std::size_t b, std::size_t e) {
    Matrix m(e - b, 3);
    for (std::size_t r = b; r < e; ++r) {
      for (std::size_t c = 0; c < 3; ++c) m(r - b, c) = logits(r, c);
    }
    return cross_entropy_loss(m, std::span(labels).subspan(b, e - b)).loss;
  };
  EXPECT_NEAR(batch_cross_entropy(logits, labels, offsets).loss, 0.5 * (part(0, 2) + part(2, 7)), 1e-14);
}

TEST(Loss, BadLabelsAndShapes) {
  const Matrix logits(2, 3);
  EXPECT_THROW(cross_entropy_loss(logits, std::vector<Label>{0, 3}), LabelError);
  EXPECT_THROW(cross_entropy_loss(logits, std::vector<Label>{0, -1}), LabelError);
  EXPECT_THROW(cross_entropy_loss(logits, std::vector<Label>{0}), ShapeError);
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, IdenticalAndAllWrong) {
  const std::vector<Label> a{0, 1, 2, 2, 1}, b{1, 2, 0, 0, 2};
  EXPECT_EQ(event_accuracy(a, a), 1.0);
  EXPECT_EQ(count_ratio_accuracy(a, a, 3), 1.0);
  EXPECT_EQ(mean_iou(a, a, 3).miou, 1.0);
  EXPECT_EQ(event_accuracy(b, a), 0.0);
}

TEST(Metrics, HandComputedTenEvents) {
  const std::vector<Label> truth{0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const std::vector<Label> pred{0, 0, 1, 1, 1, 2, 1, 2, 2, 2};
  EXPECT_DOUBLE_EQ(event_accuracy(pred, truth), 0.8);
  EXPECT_NEAR(count_ratio_accuracy(pred, truth, 3), 29.0 / 36.0, 1e-15);
  EXPECT_NEAR(*count_ratio_accuracy_literal(pred, truth, 3), 1.0, 1e-15);
  const IouResult iou = mean_iou(pred, truth, 3);
  EXPECT_NEAR(*iou.per_class[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(*iou.per_class[1], 3.0 / 5.0, 1e-15);
  EXPECT_NEAR(*iou.per_class[2], 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(iou.miou, 121.0 / 180.0, 1e-15);
}

TEST(Metrics, HalfSplitIou) {
  const std::vector<Label> truth{0, 0, 1, 1}, pred{0, 0, 0, 0};
  const IouResult iou = mean_iou(pred, truth, 2);
  EXPECT_DOUBLE_EQ(*iou.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(*iou.per_class[1], 0.0);
  EXPECT_DOUBLE_EQ(iou.miou, 0.25);
}

TEST(Metrics, DisjointSupportsAndAbsentClasses) {
  const std::vector<Label> truth{0, 0, 0}, pred{1, 1, 1};
  EXPECT_EQ(mean_iou(pred, truth, 4).miou, 0.0);
  const IouResult iou = mean_iou(truth, truth, 4);
  EXPECT_FALSE(iou.per_class[2].has_value());
  EXPECT_EQ(iou.miou, 1.0);
  EXPECT_FALSE(count_ratio_accuracy_literal(pred, truth, 4).has_value());
  EXPECT_THROW(event_accuracy(truth, std::vector<Label>{0}), ShapeError);
}

// Brute-force oracle straight from a dense confusion table.
TEST(Metrics, MatchConfusionOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 1 + rng() % 6, n = 1 + rng() % 60;
    const std::vector<Label> truth = random_labels(rng, n, c), pred = random_labels(rng, n, c);
    std::vector<std::vector<std::uint64_t>> table(c, std::vector<std::uint64_t>(c, 0));
    for (std::size_t i = 0; i < n; ++i) ++table[truth[i]][pred[i]];
    std::uint64_t diag = 0;
    double iou_sum = 0.0;
    std::size_t present = 0;
    const ConfusionMatrix cm = confusion_matrix(pred, truth, c);
    const IouResult iou = mean_iou(pred, truth, c);
    const auto counts = class_counts(cm);
    for (std::size_t k = 0; k < c; ++k) {
      diag += table[k][k];
      std::uint64_t row = 0, col = 0;
      for (std::size_t j = 0; j < c; ++j) {
        row += table[k][j];
        col += table[j][k];
        ASSERT_EQ(cm.at(k, j), table[k][j]);
      }
      const std::uint64_t tp = table[k][k], fn = row - tp, fp = col - tp;
      ASSERT_EQ(counts[k].tp, tp);
      ASSERT_EQ(counts[k].fp, fp);
      ASSERT_EQ(counts[k].fn, fn);
      ASSERT_EQ(counts[k].tp + counts[k].fp + counts[k].fn + counts[k].tn, n);
      if (tp + fp + fn > 0) {
        const double v = double(tp) / double(tp + fp + fn);
        ASSERT_EQ(*iou.per_class[k], v);
        iou_sum += v;
        ++present;
      } else {
        ASSERT_FALSE(iou.per_class[k].has_value());
      }
    }
    ASSERT_EQ(cm.total(), n);
    ASSERT_EQ(event_accuracy(pred, truth), double(diag) / double(n));
    ASSERT_EQ(iou.miou, iou_sum / double(present));
  }
}

TEST(Metrics, AccuracyInvariantUnderJointPermutation) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<Label> truth = random_labels(rng, n, 4), pred = random_labels(rng, n, 4);
    const double before = event_accuracy(pred, truth);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Label> t2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) {
      t2[i] = truth[perm[i]];
      p2[i] = pred[perm[i]];
    }
    EXPECT_EQ(event_accuracy(p2, t2), before);
  }
}

// Two rectangles side by side on a pixel lattice: class 1 at x < 20, class 2
// at 20 <= x < 40, background 0 elsewhere, all in one time slice.
struct RectScene {
  EventGraph graph;
  std::vector<Label> truth;
  std::vector<int> px, py;
};

RectScene rect_scene() {
  RectScene s;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 60; ++x) {
      s.graph.positions.push_back({x / 346.0, y / 260.0, 0.5});
      s.truth.push_back(x < 20 ? 1 : x < 40 ? 2 : 0);
      s.px.push_back(x);
      s.py.push_back(y);
    }
  }
  s.graph.duration = 100000;
  return s;
}

TEST(Boundary, NoFalsePositivesGiveZero) {
  const RectScene s = rect_scene();
  const BoundaryReport r = boundary_overlap_analysis(s.truth, s.truth, s.graph, 2.0 / 346.0);
  EXPECT_EQ(r.false_positives, 0u);
  EXPECT_EQ(r.boundary_fp_percent, 0.0);
}

TEST(Boundary, MaskFollowsLabelEdges) {
  const RectScene s = rect_scene();
  const std::vector<bool> mask = boundary_mask(s.graph, s.truth, 2.0 / 346.0 + 1e-12);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int x = s.px[i];
    const bool near_edge = (x >= 18 && x <= 21) || (x >= 38 && x <= 41);
    EXPECT_EQ(mask[i], near_edge) << "x=" << x;
  }
}

TEST(Boundary, InjectedErrorsMatchConstruction) {
  const RectScene s = rect_scene();
  std::vector<Label> pred = s.truth;
  std::size_t on_edge = 0, off_edge = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int x = s.px[i], y = s.py[i];
    if ((x == 19 || x == 40) && y % 2 == 0) {
      pred[i] = x == 19 ? 0 : 1;
      ++on_edge;
    } else if ((x == 5 || x == 50) && y % 5 == 0) {
      pred[i] = 2;
      ++off_edge;
    }
  }
  const BoundaryReport r = boundary_overlap_analysis(pred, s.truth, s.graph, 2.0 / 346.0 + 1e-12);
  EXPECT_EQ(r.false_positives, on_edge + off_edge);
  EXPECT_EQ(r.boundary_false_positives, on_edge);
  EXPECT_NEAR(r.boundary_fp_percent, 100.0 * double(on_edge) / double(on_edge + off_edge), 1e-12);

  std::vector<Label> edge_only = s.truth;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (s.px[i] == 20) edge_only[i] = 1;
  }
  EXPECT_EQ(boundary_overlap_analysis(edge_only, s.truth, s.graph, 2.0 / 346.0).boundary_fp_percent, 100.0);
}

TEST(Boundary, ForegroundCounts) {
  const RectScene s = rect_scene();
  std::vector<Label> pred = s.truth;
  pred[0] = 0;     // foreground missed
  pred[59] = 1;    // background called foreground
  const BoundaryReport r = boundary_overlap_analysis(pred, s.truth, s.graph, 0.001);
  EXPECT_EQ(r.foreground.tp, 399u);
  EXPECT_EQ(r.foreground.fn, 1u);
  EXPECT_EQ(r.foreground.fp, 1u);
  EXPECT_EQ(r.foreground.tn, 199u);
  EXPECT_THROW(boundary_overlap_analysis(pred, s.truth, s.graph, 0.0), ConfigError);
}

TEST(Metrics, ReportJsonHasEveryField) {
  const RectScene s = rect_scene();
  MetricAccumulator acc(3, 2.0 / 346.0);
  acc.add(s.truth, s.truth, s.graph);
  const nlohmann::json j = metric_report_to_json(acc.report());
  for (const char* key : {"accuracy", "count_ratio_accuracy", "count_ratio_accuracy_literal", "miou", "per_class",
                          "boundary", "events", "classes"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["accuracy"], 1.0);
}

// ---------------------------------------------------------------- schedule

TEST(Schedule, FourSubsetsOfEightGraphs) {
  const auto ranges = subset_ranges(8, 4);
  ASSERT_EQ(ranges.size(), 4u);
  std::vector<int> used(8, 0);
  for (std::size_t it = 0; it < 4; ++it) {
    for (const auto& batch : iteration_batches(ranges[it % 4], 4, 1, it)) {
      for (const std::size_t g : batch) ++used[g];
    }
  }
  EXPECT_EQ(used, std::vector<int>(8, 1));
  EXPECT_THROW(subset_ranges(3, 4), ConfigError);
}

TEST(Schedule, EachSubsetUsedExactlyKTimes) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 30, l = 1 + rng() % n, k = 1 + rng() % 4, batch = 1 + rng() % 5;
    const auto ranges = subset_ranges(n, l);
    EXPECT_EQ(ranges.front().first, 0u);
    EXPECT_EQ(ranges.back().second, n);
    std::vector<std::size_t> used(n, 0);
    for (std::size_t it = 0; it < l * k; ++it) {
      for (const auto& b : iteration_batches(ranges[it % l], batch, 9, it)) {
        EXPECT_LE(b.size(), batch);
        for (const std::size_t g : b) {
          EXPECT_GE(g, ranges[it % l].first);
          EXPECT_LT(g, ranges[it % l].second);
          ++used[g];
        }
      }
    }
    EXPECT_EQ(used, std::vector<std::size_t>(n, k));
  }
}

TEST(Train, DefaultsMatchPublishedHyperparameters) {
  const TrainConfig c;
  EXPECT_EQ(c.sgd.learning_rate, 0.001);
  EXPECT_EQ(c.sgd.momentum, 0.9);
  EXPECT_EQ(c.sgd.weight_decay, 0.0001);
  EXPECT_EQ(c.batch, 4u);
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.widths = {8, 16};
  c.k_set = {4, 8};
  c.level_weights = {1.0 / 3.0, 2.0 / 3.0};
  c.classes = 3;
  c.score_width = 4;
  c.position_width = 4;
  return c;
}

std::vector<EventGraph> tiny_dataset() {
  const SensorGeometry geo;
  WindowOptions w;
  return synthetic_dataset(two_class_scene(geo, 60), 4, 3, w);
}

TEST(Train, UnlabeledGraphIsRejected) {
  ModelParams m = build_model(tiny_config());
  std::vector<EventGraph> data{testing::graph_of(random_positions(*std::make_unique<std::mt19937_64>(1), 10))};
  EXPECT_THROW(train(m, data, TrainConfig{}), LabelError);
}

TEST(Train, DeterministicAndLearning) {
  const std::vector<EventGraph> data = tiny_dataset();
  ASSERT_EQ(data.size(), 4u);
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch = 2;
  cfg.sgd.learning_rate = 0.01;
  ModelParams a = build_model(tiny_config()), b = build_model(tiny_config());
  const TrainResult ra = train(a, data, cfg), rb = train(b, data, cfg);
  EXPECT_EQ(ra.loss_curve, rb.loss_curve);
  EXPECT_EQ(ra.steps, 60u);
  EXPECT_LT(ra.loss_curve.back(), ra.loss_curve.front());
  const MetricReport r = evaluate(a, data, 2.0 / 346.0);
  EXPECT_EQ(r.events, std::accumulate(data.begin(), data.end(), std::size_t{0},
                                      [](std::size_t s, const EventGraph& g) { return s + g.size(); }));
}

TEST(Train, CallbackStopsEarly) {
  const std::vector<EventGraph> data = tiny_dataset();
  TrainConfig cfg;
  cfg.iterations = 50;
  ModelParams m = build_model(tiny_config());
  const TrainResult r = train(m, data, cfg, [](const IterationStats& s, const ModelParams&) { return s.iteration < 2; });
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_EQ(r.loss_curve.size(), 3u);
}

TEST(Train, PredictBatchMatchesSingleForward) {
  const std::vector<EventGraph> data = tiny_dataset();
  const ModelParams m = build_model(tiny_config());
  std::vector<PreparedGraph> prepared;
  for (const auto& g : data) prepared.push_back(prepare_graph(m.config, g));
  std::vector<const PreparedGraph*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  const std::vector<Matrix> logits = predict_batch(m, ptrs);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(logits[i], gmnn_forward(m, data[i]).logits);
}

// ---------------------------------------------------------------- harnesses

TEST(Ablation, ConfigurationTables) {
  const std::vector<std::size_t> counts{1, 2, 3, 4, 5, 6, 7};
  const auto layers = layer_count_configs(counts);
  ASSERT_EQ(layers.size(), 7u);
  EXPECT_EQ(layers[0].k_set, (std::vector<std::size_t>{16}));
  EXPECT_EQ(layers[3].k_set, (std::vector<std::size_t>{16, 32, 48, 64}));
  EXPECT_EQ(layers[6].k_set.back(), 112u);
  const auto sets = k_set_configs();
  ASSERT_EQ(sets.size(), 5u);
  EXPECT_EQ(sets[1].k_set, (std::vector<std::size_t>{8, 16, 24, 32}));
  EXPECT_EQ(sets[2].k_set, (std::vector<std::size_t>{16, 32, 48, 64}));
  EXPECT_EQ(sets[3].k_set, (std::vector<std::size_t>{25, 50, 75, 100}));
  EXPECT_EQ(sets[4].k_set, (std::vector<std::size_t>{40, 80, 160, 240}));
}

TEST(Ablation, OneRowPerConfiguration) {
  const std::vector<EventGraph> data = tiny_dataset();
  AblationOptions o;
  o.base = tiny_config();
  o.train.iterations = 1;
  const std::vector<std::size_t> counts{1, 3};
  auto configs = layer_count_configs(counts);
  const auto sets = k_set_configs();
  configs.push_back(sets[0]);
  const auto rows = ablate_ccm(o, configs, data, data);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].level_weights.size(), 3u);
  EXPECT_EQ(ablation_to_json(rows).size(), 3u);
  const std::string table = ablation_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_NE(table.find("ACC%"), std::string::npos);
}

TEST(Bench, SampleStatistics) {
  const std::vector<double> s{1, 2, 3, 4};
  const TimingStats t = timing_stats(s);
  EXPECT_DOUBLE_EQ(t.mean, 2.5);
  EXPECT_NEAR(t.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(t.samples, 4u);
}

TEST(Bench, ReportShape) {
  const std::vector<EventGraph> data = tiny_dataset();
  BenchOptions o;
  o.repetitions = 3;
  const BenchReport r = bench_timing(build_model(tiny_config()), data, o);
  EXPECT_EQ(r.graphs, data.size());
  EXPECT_EQ(r.sequential_per_graph.samples, 3 * data.size());
  EXPECT_EQ(r.batch_total.samples, 3u);
  EXPECT_GT(r.batch_per_graph, 0.0);
  const nlohmann::json j = bench_to_json(r);
  EXPECT_TRUE(j.contains("sequential_per_graph"));
  EXPECT_TRUE(j.contains("batch_total"));
}

}  // namespace
}  // namespace gmnn
