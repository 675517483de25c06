#include "gmnn/hierarchy.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "gmnn/error.hpp"

namespace gmnn {

namespace {

Neighborhoods shift(const Neighborhoods& rows, std::size_t offset) {
  std::vector<NodeIndex> indices = rows.indices();
  for (auto& j : indices) j = static_cast<NodeIndex>(j + offset);
  return Neighborhoods(rows.offsets(), std::move(indices));
}

void append(Neighborhoods& into, const Neighborhoods& rows, std::size_t offset) {
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto row = rows.row(i);
    std::vector<NodeIndex> moved(row.begin(), row.end());
    for (auto& j : moved) j = static_cast<NodeIndex>(j + offset);
    into.push_row(moved);
  }
}

void append_pyramid(KnnPyramid& into, const KnnPyramid& part, std::size_t offset) {
  if (into.levels.empty()) {
    into.k_set = part.k_set;
    for (const auto& level : part.levels) into.levels.push_back(IndexMap{level.k, shift(level.rows, offset)});
    return;
  }
  if (into.k_set != part.k_set) throw StructuralError("cannot merge hierarchies built with different k sets");
  for (std::size_t k = 0; k < part.levels.size(); ++k) append(into.levels[k].rows, part.levels[k].rows, offset);
}

}  // namespace

std::vector<std::size_t> canonical_order(std::span<const Position> positions) {
  std::vector<std::size_t> order(positions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Position& pa = positions[a];
    const Position& pb = positions[b];
    return std::tie(pa.t, pa.x, pa.y) < std::tie(pb.t, pb.x, pb.y);
  });
  return order;
}

GraphLevel make_root_level(std::vector<Position> positions, const HierarchyOptions& options) {
  if (positions.empty()) throw StructuralError("cannot build a hierarchy over an empty graph");
  validate_k_set(options.k_set);
  GraphLevel level;
  level.positions = std::move(positions);
  const KnnOptions knn_options{options.method, options.include_self};
  level.pyramid = knn_pyramid(level.positions, options.k_set, knn_options);
  level.mixer_inverse = invert_index_map(level.pyramid.largest(), level.size());
  return level;
}

GraphLevel make_child_level(const GraphLevel& parent, const HierarchyOptions& options) {
  if (options.reduction == 0) throw ConfigError("reduction ratio must be positive");
  const std::size_t m = reduced_size(parent.size(), options.reduction);
  std::vector<NodeIndex> sampled = farthest_point_sample(parent.positions, m);
  std::vector<Position> positions;
  positions.reserve(sampled.size());
  for (const NodeIndex i : sampled) positions.push_back(parent.positions[i]);

  GraphLevel level = make_root_level(std::move(positions), options);
  level.depth = parent.depth + 1;
  level.parent_indices = std::move(sampled);
  level.parent_size = parent.size();

  const KnnOptions knn_options{options.method, options.include_self};
  level.down = knn_cross_pyramid(level.positions, parent.positions, options.k_set, knn_options);

  // Parent nodes that no sampled node selected at a given k take their
  // nearest sampled node, so every fine node receives a message.
  const IndexMap nearest = knn_cross(parent.positions, level.positions, 1, knn_options);
  for (const auto& map : level.down.levels) {
    const InverseIndexMap inverse = invert_index_map(map, parent.size());
    Neighborhoods rows;
    std::size_t fallbacks = 0;
    for (std::size_t j = 0; j < parent.size(); ++j) {
      const auto row = inverse.rows.row(j);
      if (row.empty()) {
        rows.push_row(nearest.rows.row(j));
        ++fallbacks;
      } else {
        rows.push_row(row);
      }
    }
    level.up.push_back(std::move(rows));
    level.up_fallbacks.push_back(fallbacks);
  }
  return level;
}

GraphHierarchy build_hierarchy(const EventGraph& graph, const HierarchyOptions& options) {
  if (graph.empty()) throw StructuralError("cannot build a hierarchy over an empty graph");
  GraphHierarchy h;
  h.canonical_order = canonical_order(graph.positions);
  std::vector<Position> positions;
  positions.reserve(graph.size());
  for (const std::size_t i : h.canonical_order) positions.push_back(graph.positions[i]);
  h.levels.push_back(make_root_level(std::move(positions), options));
  for (std::size_t d = 0; d < options.depth; ++d) h.levels.push_back(make_child_level(h.levels.back(), options));
  h.graph_offsets = {0, graph.size()};
  return h;
}

GraphHierarchy merge_hierarchies(std::span<const GraphHierarchy* const> parts) {
  if (parts.empty()) throw StructuralError("nothing to merge");
  const std::size_t depth = parts.front()->levels.size();
  GraphHierarchy out;
  out.levels.resize(depth);
  for (std::size_t d = 0; d < depth; ++d) out.levels[d].depth = d;

  for (const GraphHierarchy* part : parts) {
    if (part->levels.size() != depth) throw StructuralError("cannot merge hierarchies of different depth");
    const std::size_t root_offset = out.levels[0].size();
    for (const std::size_t i : part->canonical_order) out.canonical_order.push_back(i + root_offset);
    for (std::size_t g = 1; g < part->graph_offsets.size(); ++g) {
      out.graph_offsets.push_back(root_offset + part->graph_offsets[g]);
    }
    for (std::size_t d = 0; d < depth; ++d) {
      const GraphLevel& src = part->levels[d];
      GraphLevel& dst = out.levels[d];
      const std::size_t offset = dst.size();
      const std::size_t parent_offset = d == 0 ? 0 : out.levels[d - 1].size() - part->levels[d - 1].size();

      append_pyramid(dst.pyramid, src.pyramid, offset);
      append(dst.mixer_inverse.rows, src.mixer_inverse.rows, offset);
      if (d > 0) {
        for (const NodeIndex i : src.parent_indices) {
          dst.parent_indices.push_back(static_cast<NodeIndex>(i + parent_offset));
        }
        dst.parent_size += src.parent_size;
        append_pyramid(dst.down, src.down, parent_offset);
        if (dst.up.empty()) {
          dst.up.resize(src.up.size());
          dst.up_fallbacks.assign(src.up.size(), 0);
        }
        for (std::size_t k = 0; k < src.up.size(); ++k) {
          append(dst.up[k], src.up[k], offset);
          dst.up_fallbacks[k] += src.up_fallbacks[k];
        }
      }
      dst.positions.insert(dst.positions.end(), src.positions.begin(), src.positions.end());
    }
  }
  return out;
}

}  // namespace gmnn
