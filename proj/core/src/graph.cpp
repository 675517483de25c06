#include "gmnn/graph.hpp"

#include "gmnn/error.hpp"

namespace gmnn {

EventGraph build_graph(const EventWindow& window, const SensorGeometry& geometry) {
  geometry.validate();
  if (window.empty()) throw StructuralError("cannot build a graph from an empty window");
  if (window.duration <= 0) throw ConfigError("window duration must be positive");

  EventGraph graph;
  graph.t0 = window.t0;
  graph.duration = window.duration;
  graph.positions.reserve(window.size());
  const bool labeled = all_labeled(window.events);
  if (labeled) graph.labels.reserve(window.size());

  const double width = geometry.width;
  const double height = geometry.height;
  const double duration = static_cast<double>(window.duration);
  for (const auto& e : window.events) {
    graph.positions.push_back({e.x / width, e.y / height, static_cast<double>(e.t - window.t0) / duration});
    if (labeled) graph.labels.push_back(*e.label);
  }
  return graph;
}

EventGraph permute_graph(const EventGraph& graph, std::span<const std::size_t> order) {
  if (order.size() != graph.size()) throw ShapeError("permutation length does not match graph size");
  EventGraph out;
  out.t0 = graph.t0;
  out.duration = graph.duration;
  out.positions.reserve(order.size());
  for (const auto i : order) out.positions.push_back(graph.positions.at(i));
  if (graph.has_labels()) {
    out.labels.reserve(order.size());
    for (const auto i : order) out.labels.push_back(graph.labels[i]);
  }
  return out;
}

}  // namespace gmnn
