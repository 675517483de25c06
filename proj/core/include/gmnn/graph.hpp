#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmnn/events.hpp"

namespace gmnn {

// Normalized spatiotemporal coordinates [x/X, y/Y, (t - t0)/T].
struct Position {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

inline double squared_distance(const Position& a, const Position& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dt = a.t - b.t;
  return dx * dx + dy * dy + dt * dt;
}

struct EventGraph {
  std::vector<Position> positions;
  std::vector<ClassId> labels;  // empty when the source window is unlabeled
  Timestamp t0 = 0;
  Timestamp duration = 0;

  std::size_t size() const noexcept { return positions.size(); }
  bool empty() const noexcept { return positions.empty(); }
  bool has_labels() const noexcept { return !labels.empty() && labels.size() == positions.size(); }
};

// Throws StructuralError for an empty window; callers skip those.
EventGraph build_graph(const EventWindow& window, const SensorGeometry& geometry);

// Node i of the result is node order[i] of the input.
EventGraph permute_graph(const EventGraph& graph, std::span<const std::size_t> order);

}  // namespace gmnn
