#include "gmnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "gmnn/error.hpp"

namespace gmnn {

namespace {

void check_pair(std::span<const Label> pred, std::span<const Label> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("prediction and truth lengths differ: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()));
  }
}

void check_label(Label l, std::size_t classes) {
  if (l < 0 || static_cast<std::size_t>(l) >= classes) {
    throw LabelError("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
  }
}

nlohmann::json counts_json(const ClassCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (const auto c : counts) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::true_count(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::pred_count(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes; ++t) s += at(t, c);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const Label> pred, std::span<const Label> truth, std::size_t classes) {
  check_pair(pred, truth);
  ConfusionMatrix cm{classes, std::vector<std::uint64_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    check_label(pred[i], classes);
    check_label(truth[i], classes);
    ++cm.counts[static_cast<std::size_t>(truth[i]) * classes + static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

std::vector<ClassCounts> class_counts(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  std::vector<ClassCounts> out(cm.classes);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    out[c].tp = cm.at(c, c);
    out[c].fn = cm.true_count(c) - out[c].tp;
    out[c].fp = cm.pred_count(c) - out[c].tp;
    out[c].tn = total - out[c].tp - out[c].fn - out[c].fp;
  }
  return out;
}

double event_accuracy(std::span<const Label> pred, std::span<const Label> truth) {
  check_pair(pred, truth);
  if (pred.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double count_ratio_accuracy(std::span<const Label> pred, std::span<const Label> truth, std::size_t classes) {
  const ConfusionMatrix cm = confusion_matrix(pred, truth, classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto t = cm.true_count(c), p = cm.pred_count(c);
    sum += std::max(t, p) == 0 ? 1.0 : static_cast<double>(std::min(t, p)) / static_cast<double>(std::max(t, p));
  }
  return sum / static_cast<double>(classes);
}

std::optional<double> count_ratio_accuracy_literal(std::span<const Label> pred, std::span<const Label> truth,
                                                   std::size_t classes) {
  const ConfusionMatrix cm = confusion_matrix(pred, truth, classes);
  double sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto t = cm.true_count(c), p = cm.pred_count(c);
    if (t == 0 && p == 0) continue;
    if (t == 0) return std::nullopt;
    sum += static_cast<double>(p) / static_cast<double>(t);
    ++seen;
  }
  return seen == 0 ? 1.0 : sum / static_cast<double>(seen);
}

IouResult mean_iou(std::span<const Label> pred, std::span<const Label> truth, std::size_t classes) {
  const ConfusionMatrix cm = confusion_matrix(pred, truth, classes);
  IouResult r;
  r.per_class.resize(classes);
  double sum = 0.0;
  std::size_t present = 0;
  const auto counts_per_class = class_counts(cm);
  for (std::size_t c = 0; c < classes; ++c) {
    const ClassCounts& counts = counts_per_class[c];
    const std::uint64_t denom = counts.tp + counts.fp + counts.fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(counts.tp) / static_cast<double>(denom);
    r.per_class[c] = iou;
    sum += iou;
    ++present;
  }
  r.miou = present == 0 ? 1.0 : sum / static_cast<double>(present);
  return r;
}

std::vector<bool> boundary_mask(const EventGraph& graph, std::span<const Label> truth, double radius) {
  if (truth.size() != graph.size()) throw ShapeError("truth length must match graph size");
  if (!(radius > 0.0)) throw ConfigError("boundary radius must be positive");
  const std::size_t n = graph.size();
  std::vector<bool> mask(n, false);
  if (n == 0) return mask;

  // Square cells of side `radius`: any partner lies in the 3x3 block.
  auto cell_of = [&](double v) { return static_cast<std::int64_t>(std::floor(v / radius)); };
  auto key = [](std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint64_t>(cy & 0xffffffff);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    cells[key(cell_of(graph.positions[i].x), cell_of(graph.positions[i].y))].push_back(i);
  }
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < n; ++i) {
    const Position& p = graph.positions[i];
    const auto cx = cell_of(p.x), cy = cell_of(p.y);
    for (std::int64_t dx = -1; dx <= 1 && !mask[i]; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !mask[i]; ++dy) {
        const auto it = cells.find(key(cx + dx, cy + dy));
        if (it == cells.end()) continue;
        for (const std::size_t j : it->second) {
          if (truth[j] == truth[i]) continue;
          const double ddx = graph.positions[j].x - p.x, ddy = graph.positions[j].y - p.y;
          if (ddx * ddx + ddy * ddy <= r2) {
            mask[i] = true;
            break;
          }
        }
      }
    }
  }
  return mask;
}

BoundaryReport boundary_overlap_analysis(std::span<const Label> pred, std::span<const Label> truth,
                                         const EventGraph& graph, double radius) {
  check_pair(pred, truth);
  const std::vector<bool> mask = boundary_mask(graph, truth, radius);
  BoundaryReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.boundary_events += mask[i];
    if (pred[i] != truth[i]) {
      ++r.false_positives;
      r.boundary_false_positives += mask[i];
    }
    const bool t = truth[i] != 0, p = pred[i] != 0;
    if (t && p) ++r.foreground.tp;
    else if (!t && p) ++r.foreground.fp;
    else if (t && !p) ++r.foreground.fn;
    else ++r.foreground.tn;
  }
  r.boundary_fp_percent = r.false_positives == 0 ? 0.0
                                                 : 100.0 * static_cast<double>(r.boundary_false_positives) /
                                                       static_cast<double>(r.false_positives);
  return r;
}

MetricAccumulator::MetricAccumulator(std::size_t classes, double boundary_radius)
    : classes_(classes), radius_(boundary_radius) {
  if (classes == 0) throw ConfigError("at least one class is required");
}

void MetricAccumulator::add(std::span<const Label> pred, std::span<const Label> truth, const EventGraph& graph) {
  const BoundaryReport b = boundary_overlap_analysis(pred, truth, graph, radius_);
  boundary_.false_positives += b.false_positives;
  boundary_.boundary_false_positives += b.boundary_false_positives;
  boundary_.boundary_events += b.boundary_events;
  boundary_.foreground.tp += b.foreground.tp;
  boundary_.foreground.fp += b.foreground.fp;
  boundary_.foreground.tn += b.foreground.tn;
  boundary_.foreground.fn += b.foreground.fn;
  pred_.insert(pred_.end(), pred.begin(), pred.end());
  truth_.insert(truth_.end(), truth.begin(), truth.end());
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.classes = classes_;
  r.events = pred_.size();
  r.accuracy = event_accuracy(pred_, truth_);
  r.count_ratio = count_ratio_accuracy(pred_, truth_, classes_);
  r.count_ratio_literal = count_ratio_accuracy_literal(pred_, truth_, classes_);
  r.iou = mean_iou(pred_, truth_, classes_);
  r.confusion = class_counts(confusion_matrix(pred_, truth_, classes_));
  r.boundary = boundary_;
  r.boundary.boundary_fp_percent =
      boundary_.false_positives == 0 ? 0.0
                                     : 100.0 * static_cast<double>(boundary_.boundary_false_positives) /
                                           static_cast<double>(boundary_.false_positives);
  return r;
}

nlohmann::json metric_report_to_json(const MetricReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.classes; ++c) {
    nlohmann::json row = counts_json(r.confusion[c]);
    row["class"] = c;
    row["iou"] = r.iou.per_class[c] ? nlohmann::json(*r.iou.per_class[c]) : nlohmann::json(nullptr);
    per_class.push_back(std::move(row));
  }
  return {{"events", r.events},
          {"classes", r.classes},
          {"accuracy", r.accuracy},
          {"count_ratio_accuracy", r.count_ratio},
          {"count_ratio_accuracy_literal",
           r.count_ratio_literal ? nlohmann::json(*r.count_ratio_literal) : nlohmann::json(nullptr)},
          {"miou", r.iou.miou},
          {"per_class", std::move(per_class)},
          {"boundary",
           {{"false_positives", r.boundary.false_positives},
            {"boundary_false_positives", r.boundary.boundary_false_positives},
            {"boundary_fp_percent", r.boundary.boundary_fp_percent},
            {"boundary_events", r.boundary.boundary_events},
            {"foreground", counts_json(r.boundary.foreground)}}}};
}

}  // namespace gmnn
