#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmnn/graph.hpp"
#include "gmnn/index.hpp"

namespace gmnn {

struct HierarchyOptions {
  std::vector<std::size_t> k_set = kDefaultKSet;
  std::size_t reduction = 4;
  std::size_t depth = 4;  // number of transition-down steps
  bool include_self = true;
  KnnMethod method = KnnMethod::kGrid;
};

// One resolution of the encoder-decoder. Level 0 is the input graph; level
// l + 1 is sampled from level l by farthest point sampling.
struct GraphLevel {
  std::size_t depth = 0;
  std::vector<Position> positions;
  std::vector<NodeIndex> parent_indices;  // into level depth - 1

  KnnPyramid pyramid;             // self kNN, consumed by mixer blocks
  InverseIndexMap mixer_inverse;  // inverse of the widest self kNN level

  // Set for depth >= 1 only.
  std::size_t parent_size = 0;
  KnnPyramid down;                   // this level's nodes -> parent nodes
  std::vector<Neighborhoods> up;     // per k: parent nodes -> this level's nodes
  std::vector<std::size_t> up_fallbacks;  // per k: parent rows filled by nearest sampled node

  std::size_t size() const noexcept { return positions.size(); }
  bool has_down_maps() const noexcept { return depth > 0 && !down.levels.empty() && !up.empty(); }
};

struct GraphHierarchy {
  std::vector<GraphLevel> levels;
  // Per graph node ranges at level 0 (a batch stacks several graphs).
  std::vector<std::size_t> graph_offsets{0};
  // Position i of level 0 holds input node canonical_order[i].
  std::vector<std::size_t> canonical_order;

  std::size_t graph_count() const noexcept { return graph_offsets.size() - 1; }
};

inline std::size_t reduced_size(std::size_t n, std::size_t reduction) { return (n + reduction - 1) / reduction; }

// Sorts nodes by (t, x, y, index), which makes every downstream tie-break
// depend on positions only.
std::vector<std::size_t> canonical_order(std::span<const Position> positions);

GraphLevel make_root_level(std::vector<Position> positions, const HierarchyOptions& options);

// Samples ceil(N / reduction) parent nodes, builds the cross kNN pyramid from
// the samples into the parent and the inverse lists used when upsampling.
GraphLevel make_child_level(const GraphLevel& parent, const HierarchyOptions& options);

GraphHierarchy build_hierarchy(const EventGraph& graph, const HierarchyOptions& options);

// Stacks hierarchies of the same depth into one block-diagonal hierarchy.
GraphHierarchy merge_hierarchies(std::span<const GraphHierarchy* const> parts);

}  // namespace gmnn
