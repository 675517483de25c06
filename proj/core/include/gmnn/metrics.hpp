#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gmnn/graph.hpp"

namespace gmnn {

using Label = std::int32_t;

// counts[t * C + p]: events of true class t predicted as p.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::uint64_t total() const;
  std::uint64_t true_count(std::size_t c) const;
  std::uint64_t pred_count(std::size_t c) const;
};

ConfusionMatrix confusion_matrix(std::span<const Label> pred, std::span<const Label> truth, std::size_t classes);

struct ClassCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

std::vector<ClassCounts> class_counts(const ConfusionMatrix& cm);

// Fraction of events whose predicted class equals the true class.
double event_accuracy(std::span<const Label> pred, std::span<const Label> truth);

// Mean over classes of min(n_true, n_pred) / max(n_true, n_pred); a class
// with both counts zero scores 1.
double count_ratio_accuracy(std::span<const Label> pred, std::span<const Label> truth, std::size_t classes);

// Mean over classes seen in either vector of n_pred / n_true. Empty when a
// predicted class never occurs in the truth (the ratio is unbounded).
std::optional<double> count_ratio_accuracy_literal(std::span<const Label> pred, std::span<const Label> truth,
                                                   std::size_t classes);

struct IouResult {
  double miou = 0.0;
  std::vector<std::optional<double>> per_class;  // empty for classes absent from both
};

IouResult mean_iou(std::span<const Label> pred, std::span<const Label> truth, std::size_t classes);

// Label 0 is background; every other class is foreground.
struct BoundaryReport {
  std::uint64_t false_positives = 0;  // misclassified events
  std::uint64_t boundary_false_positives = 0;
  double boundary_fp_percent = 0.0;
  std::uint64_t boundary_events = 0;
  ClassCounts foreground;
};

// An event is on a boundary when another event with a different true label
// lies within `radius` in the normalized x-y plane.
std::vector<bool> boundary_mask(const EventGraph& graph, std::span<const Label> truth, double radius);

BoundaryReport boundary_overlap_analysis(std::span<const Label> pred, std::span<const Label> truth,
                                         const EventGraph& graph, double radius);

struct MetricReport {
  std::size_t classes = 0;
  std::size_t events = 0;
  double accuracy = 0.0;
  double count_ratio = 0.0;
  std::optional<double> count_ratio_literal;
  IouResult iou;
  std::vector<ClassCounts> confusion;
  BoundaryReport boundary;
};

// Accumulates over several graphs; the boundary analysis runs per graph.
class MetricAccumulator {
 public:
  MetricAccumulator(std::size_t classes, double boundary_radius);
  void add(std::span<const Label> pred, std::span<const Label> truth, const EventGraph& graph);
  MetricReport report() const;

 private:
  std::size_t classes_;
  double radius_;
  std::vector<Label> pred_, truth_;
  BoundaryReport boundary_;
};

nlohmann::json metric_report_to_json(const MetricReport& report);

}  // namespace gmnn
