#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gmnn/graph.hpp"

namespace gmnn {

using NodeIndex = std::uint32_t;

// Compressed rows of node indices. Row i spans indices[offsets[i], offsets[i+1]).
class Neighborhoods {
 public:
  Neighborhoods() : offsets_{0} {}
  Neighborhoods(std::vector<std::size_t> offsets, std::vector<NodeIndex> indices);

  static Neighborhoods from_rows(const std::vector<std::vector<NodeIndex>>& rows);

  std::size_t rows() const noexcept { return offsets_.size() - 1; }
  std::size_t total() const noexcept { return indices_.size(); }
  std::span<const NodeIndex> row(std::size_t i) const noexcept {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t row_size(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  const std::vector<NodeIndex>& indices() const noexcept { return indices_; }

  void push_row(std::span<const NodeIndex> row);
  std::vector<std::vector<NodeIndex>> to_rows() const;

  friend bool operator==(const Neighborhoods&, const Neighborhoods&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeIndex> indices_;
};

// Row i lists the neighbors of query i by ascending key
// (squared distance, t, x, y, index).
struct IndexMap {
  std::size_t k = 0;
  Neighborhoods rows;

  friend bool operator==(const IndexMap&, const IndexMap&) = default;
};

// Row j lists, ascending, every query i whose IndexMap row contains j.
struct InverseIndexMap {
  Neighborhoods rows;

  friend bool operator==(const InverseIndexMap&, const InverseIndexMap&) = default;
};

struct KnnPyramid {
  std::vector<std::size_t> k_set;
  std::vector<IndexMap> levels;

  const IndexMap& largest() const { return levels.back(); }
};

enum class KnnMethod { kBruteForce, kGrid };

struct KnnOptions {
  KnnMethod method = KnnMethod::kGrid;
  // Self-kNN only: whether query i appears in its own row.
  bool include_self = true;
};

inline const std::vector<std::size_t> kDefaultKSet{16, 32, 48, 64};

IndexMap knn(std::span<const Position> points, std::size_t k, const KnnOptions& options = {});
IndexMap knn(const EventGraph& graph, std::size_t k, const KnnOptions& options = {});

// Neighbors of each query among `points`; this is the map a transition-down
// pass consumes. `queries` may be any positions, typically a sampled subset.
IndexMap knn_cross(std::span<const Position> queries, std::span<const Position> points, std::size_t k,
                   const KnnOptions& options = {});

// One sorted pass per query with the largest k; smaller levels are prefixes.
KnnPyramid knn_pyramid(std::span<const Position> points, std::span<const std::size_t> k_set,
                       const KnnOptions& options = {});
KnnPyramid knn_cross_pyramid(std::span<const Position> queries, std::span<const Position> points,
                             std::span<const std::size_t> k_set, const KnnOptions& options = {});

// Greedy farthest point sampling. Starts at the node nearest the centroid and
// breaks distance ties by ascending index. Throws StructuralError if m > N or
// m == 0.
std::vector<NodeIndex> farthest_point_sample(std::span<const Position> points, std::size_t m);

InverseIndexMap invert_index_map(const IndexMap& map, std::size_t domain_size);
InverseIndexMap invert_neighborhoods(const Neighborhoods& rows, std::size_t domain_size);

void validate_k_set(std::span<const std::size_t> k_set);

// Text dump: one `i,xn,yn,tn,label` line per node, then `M k i: j1 j2 ...`.
std::string format_graph_dump(const EventGraph& graph, const KnnPyramid& pyramid);

}  // namespace gmnn
