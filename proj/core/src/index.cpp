#include "gmnn/index.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

#include "gmnn/error.hpp"

namespace gmnn {
namespace {

// Total order over candidates: distance first, then position-derived keys so
// that relabeling nodes never changes which neighbor wins a tie.
struct Candidate {
  double d2;
  double t;
  double x;
  double y;
  NodeIndex index;

  friend bool operator<(const Candidate& a, const Candidate& b) noexcept {
    return std::tie(a.d2, a.t, a.x, a.y, a.index) < std::tie(b.d2, b.t, b.x, b.y, b.index);
  }
};

Candidate make_candidate(const Position& query, const Position& p, NodeIndex index) noexcept {
  return {squared_distance(query, p), p.t, p.x, p.y, index};
}

constexpr NodeIndex kNoExclusion = std::numeric_limits<NodeIndex>::max();

std::vector<double>& scratch_distances() {
  thread_local std::vector<double> buffer;
  return buffer;
}

// Two passes: squared distances for every point, then the kk-th smallest
// distance as a threshold. Only points at or below it are ranked by the full
// key, so ties at the threshold still resolve exactly.
void brute_force_row(const Position& query, std::span<const Position> points, std::size_t kk, NodeIndex exclude,
                     std::vector<double>& d2, std::vector<Candidate>& scratch, std::vector<NodeIndex>& out) {
  out.clear();
  if (kk == 0) return;
  d2.resize(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) d2[j] = squared_distance(query, points[j]);
  if (exclude != kNoExclusion) d2[exclude] = std::numeric_limits<double>::infinity();
  // Max-heap of the kk smallest distances seen so far; its top is the threshold.
  std::vector<double>& best = scratch_distances();
  best.clear();
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (best.size() < kk) {
      best.push_back(d2[j]);
      std::push_heap(best.begin(), best.end());
    } else if (d2[j] < best.front()) {
      std::pop_heap(best.begin(), best.end());
      best.back() = d2[j];
      std::push_heap(best.begin(), best.end());
    }
  }
  const double threshold = best.front();
  scratch.clear();
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j != exclude && d2[j] <= threshold) scratch.push_back(make_candidate(query, points[j], static_cast<NodeIndex>(j)));
  }
  std::sort(scratch.begin(), scratch.end());
  for (std::size_t r = 0; r < kk; ++r) out.push_back(scratch[r].index);
}

// Uniform grid over the bounding box of the indexed points. Exact k-nearest
// queries expand Chebyshev shells of cells until the k-th best candidate is
// strictly closer than anything outside the visited block.
class UniformGrid {
 public:
  UniformGrid(std::span<const Position> points, std::size_t k) : points_(points) {
    lo_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
    std::array<double, 3> hi{-lo_[0], -lo_[1], -lo_[2]};
    for (const auto& p : points) {
      const std::array<double, 3> c{p.x, p.y, p.t};
      for (int a = 0; a < 3; ++a) {
        lo_[a] = std::min(lo_[a], c[a]);
        hi[a] = std::max(hi[a], c[a]);
      }
    }
    // Aim for the 27-cell block around a query to hold about 2k points.
    const double n = static_cast<double>(points.size());
    const double target = std::cbrt(27.0 * n / (2.0 * static_cast<double>(std::max<std::size_t>(k, 1))));
    const int per_axis = std::clamp(static_cast<int>(target), 1, 128);
    for (int a = 0; a < 3; ++a) {
      const double extent = hi[a] - lo_[a];
      dims_[a] = extent > 0.0 ? per_axis : 1;
      edge_[a] = extent > 0.0 ? extent / dims_[a] : 1.0;
      slack_ = std::max(slack_, 1e-9 * (std::abs(lo_[a]) + std::abs(hi[a]) + edge_[a]));
    }

    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    cell_start_.assign(cells + 1, 0);
    std::vector<std::size_t> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cell_of[i] = flat(cell_coords(points[i]));
      ++cell_start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
    order_.resize(points.size());
    std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) order_[fill[cell_of[i]]++] = static_cast<NodeIndex>(i);
  }

  void query(const Position& q, std::size_t kk, NodeIndex exclude, std::vector<Candidate>& heap,
             std::vector<NodeIndex>& out) const {
    heap.clear();
    out.clear();
    if (kk == 0) return;
    const auto cq = cell_coords(q);
    const std::array<double, 3> qc{q.x, q.y, q.t};
    for (int r = 0;; ++r) {
      visit_shell(cq, r, [&](std::size_t cell) {
        for (std::size_t s = cell_start_[cell]; s < cell_start_[cell + 1]; ++s) {
          const NodeIndex j = order_[s];
          if (j == exclude) continue;
          if (heap.size() == kk && squared_distance(q, points_[j]) > heap.front().d2) continue;
          const Candidate c = make_candidate(q, points_[j], j);
          if (heap.size() < kk) {
            heap.push_back(c);
            std::push_heap(heap.begin(), heap.end());
          } else if (c < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = c;
            std::push_heap(heap.begin(), heap.end());
          }
        }
      });

      bool covered = true;
      double bound = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        if (cq[a] - r > 0) {
          covered = false;
          bound = std::min(bound, qc[a] - (lo_[a] + (cq[a] - r) * edge_[a]));
        }
        if (cq[a] + r < dims_[a] - 1) {
          covered = false;
          bound = std::min(bound, (lo_[a] + (cq[a] + r + 1) * edge_[a]) - qc[a]);
        }
      }
      if (covered) break;
      // Shrink the bound to absorb rounding in cell assignment near faces.
      const double safe = bound - slack_;
      if (heap.size() == kk && safe > 0.0 && heap.front().d2 < safe * safe) break;
    }
    std::sort_heap(heap.begin(), heap.end());
    for (const auto& c : heap) out.push_back(c.index);
  }

 private:
  std::array<int, 3> cell_coords(const Position& p) const {
    const std::array<double, 3> c{p.x, p.y, p.t};
    std::array<int, 3> out{};
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((c[a] - lo_[a]) / edge_[a]);
      out[a] = std::clamp(static_cast<int>(std::clamp(f, -1.0, static_cast<double>(dims_[a]))), 0, dims_[a] - 1);
    }
    return out;
  }

  std::size_t flat(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  template <typename F>
  void visit_shell(const std::array<int, 3>& center, int r, F&& f) const {
    const int z0 = std::max(0, center[2] - r), z1 = std::min(dims_[2] - 1, center[2] + r);
    const int y0 = std::max(0, center[1] - r), y1 = std::min(dims_[1] - 1, center[1] + r);
    const int x0 = std::max(0, center[0] - r), x1 = std::min(dims_[0] - 1, center[0] + r);
    for (int z = z0; z <= z1; ++z) {
      const bool z_edge = std::abs(z - center[2]) == r;
      for (int y = y0; y <= y1; ++y) {
        const bool yz_edge = z_edge || std::abs(y - center[1]) == r;
        if (yz_edge) {
          for (int x = x0; x <= x1; ++x) f(flat({x, y, z}));
        } else {
          if (center[0] - r >= 0) f(flat({center[0] - r, y, z}));
          if (r > 0 && center[0] + r < dims_[0]) f(flat({center[0] + r, y, z}));
        }
      }
    }
  }

  std::span<const Position> points_;
  std::array<double, 3> lo_{};
  std::array<double, 3> edge_{};
  std::array<int, 3> dims_{1, 1, 1};
  double slack_ = 0.0;
  std::vector<std::size_t> cell_start_;
  std::vector<NodeIndex> order_;
};

IndexMap knn_impl(std::span<const Position> queries, std::span<const Position> points, std::size_t k,
                  const KnnOptions& options, bool self_query) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (points.empty()) throw StructuralError("kNN over an empty graph");
  if (points.size() > std::numeric_limits<NodeIndex>::max() - 1) throw StructuralError("graph too large");

  const bool exclude_self = self_query && !options.include_self;
  const std::size_t available = exclude_self ? points.size() - 1 : points.size();
  const std::size_t kk = std::min(k, available);

  IndexMap map;
  map.k = k;
  std::vector<std::size_t> offsets(queries.size() + 1);
  std::vector<NodeIndex> indices;
  indices.reserve(queries.size() * kk);
  std::vector<Candidate> scratch;
  std::vector<NodeIndex> row;

  if (options.method == KnnMethod::kBruteForce) {
    std::vector<double> d2;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const NodeIndex exclude = exclude_self ? static_cast<NodeIndex>(i) : kNoExclusion;
      brute_force_row(queries[i], points, kk, exclude, d2, scratch, row);
      indices.insert(indices.end(), row.begin(), row.end());
      offsets[i + 1] = indices.size();
    }
  } else {
    const UniformGrid grid(points, kk);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const NodeIndex exclude = exclude_self ? static_cast<NodeIndex>(i) : kNoExclusion;
      grid.query(queries[i], kk, exclude, scratch, row);
      indices.insert(indices.end(), row.begin(), row.end());
      offsets[i + 1] = indices.size();
    }
  }
  map.rows = Neighborhoods(std::move(offsets), std::move(indices));
  return map;
}

KnnPyramid pyramid_from(const IndexMap& widest, std::span<const std::size_t> k_set) {
  KnnPyramid pyramid;
  pyramid.k_set.assign(k_set.begin(), k_set.end());
  for (const auto k : k_set) {
    IndexMap level;
    level.k = k;
    for (std::size_t i = 0; i < widest.rows.rows(); ++i) {
      const auto row = widest.rows.row(i);
      level.rows.push_row(row.first(std::min(k, row.size())));
    }
    pyramid.levels.push_back(std::move(level));
  }
  return pyramid;
}

}  // namespace

Neighborhoods::Neighborhoods(std::vector<std::size_t> offsets, std::vector<NodeIndex> indices)
    : offsets_(std::move(offsets)), indices_(std::move(indices)) {
  if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != indices_.size() ||
      !std::is_sorted(offsets_.begin(), offsets_.end())) {
    throw StructuralError("malformed neighborhood offsets");
  }
}

Neighborhoods Neighborhoods::from_rows(const std::vector<std::vector<NodeIndex>>& rows) {
  Neighborhoods out;
  for (const auto& r : rows) out.push_row(r);
  return out;
}

void Neighborhoods::push_row(std::span<const NodeIndex> row) {
  indices_.insert(indices_.end(), row.begin(), row.end());
  offsets_.push_back(indices_.size());
}

std::vector<std::vector<NodeIndex>> Neighborhoods::to_rows() const {
  std::vector<std::vector<NodeIndex>> out;
  out.reserve(rows());
  for (std::size_t i = 0; i < rows(); ++i) {
    const auto r = row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

void validate_k_set(std::span<const std::size_t> k_set) {
  if (k_set.empty()) throw ConfigError("K set must not be empty");
  if (k_set.front() < 1) throw ConfigError("K set entries must be at least 1");
  for (std::size_t i = 1; i < k_set.size(); ++i) {
    if (k_set[i] <= k_set[i - 1]) throw ConfigError("K set must be strictly increasing");
  }
}

IndexMap knn(std::span<const Position> points, std::size_t k, const KnnOptions& options) {
  return knn_impl(points, points, k, options, true);
}

IndexMap knn(const EventGraph& graph, std::size_t k, const KnnOptions& options) {
  return knn(graph.positions, k, options);
}

IndexMap knn_cross(std::span<const Position> queries, std::span<const Position> points, std::size_t k,
                   const KnnOptions& options) {
  return knn_impl(queries, points, k, options, false);
}

KnnPyramid knn_pyramid(std::span<const Position> points, std::span<const std::size_t> k_set,
                       const KnnOptions& options) {
  validate_k_set(k_set);
  return pyramid_from(knn(points, k_set.back(), options), k_set);
}

KnnPyramid knn_cross_pyramid(std::span<const Position> queries, std::span<const Position> points,
                             std::span<const std::size_t> k_set, const KnnOptions& options) {
  validate_k_set(k_set);
  return pyramid_from(knn_cross(queries, points, k_set.back(), options), k_set);
}

std::vector<NodeIndex> farthest_point_sample(std::span<const Position> points, std::size_t m) {
  const std::size_t n = points.size();
  if (m == 0) throw StructuralError("farthest point sampling needs m >= 1");
  if (m > n) {
    throw StructuralError("cannot sample " + std::to_string(m) + " of " + std::to_string(n) + " nodes");
  }

  Position centroid;
  for (const auto& p : points) {
    centroid.x += p.x;
    centroid.y += p.y;
    centroid.t += p.t;
  }
  centroid.x /= static_cast<double>(n);
  centroid.y /= static_cast<double>(n);
  centroid.t /= static_cast<double>(n);

  std::size_t start = 0;
  double best = squared_distance(points[0], centroid);
  for (std::size_t i = 1; i < n; ++i) {
    const double d = squared_distance(points[i], centroid);
    if (d < best) {
      best = d;
      start = i;
    }
  }

  std::vector<NodeIndex> chosen;
  chosen.reserve(m);
  std::vector<double> min_d2(n);
  std::vector<bool> taken(n, false);
  chosen.push_back(static_cast<NodeIndex>(start));
  taken[start] = true;
  for (std::size_t i = 0; i < n; ++i) min_d2[i] = squared_distance(points[i], points[start]);

  while (chosen.size() < m) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (pick == n || min_d2[i] > min_d2[pick]) pick = i;
    }
    chosen.push_back(static_cast<NodeIndex>(pick));
    taken[pick] = true;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], squared_distance(points[i], points[pick]));
    }
  }
  return chosen;
}

InverseIndexMap invert_neighborhoods(const Neighborhoods& rows, std::size_t domain_size) {
  std::vector<std::size_t> offsets(domain_size + 1, 0);
  for (const auto j : rows.indices()) {
    if (j >= domain_size) {
      throw BoundsError("index " + std::to_string(j) + " outside domain of size " + std::to_string(domain_size));
    }
    ++offsets[j + 1];
  }
  for (std::size_t j = 0; j < domain_size; ++j) offsets[j + 1] += offsets[j];
  std::vector<NodeIndex> indices(rows.total());
  std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
  // Visiting queries in ascending order leaves every inverse row sorted.
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    for (const auto j : rows.row(i)) indices[fill[j]++] = static_cast<NodeIndex>(i);
  }
  return {Neighborhoods(std::move(offsets), std::move(indices))};
}

InverseIndexMap invert_index_map(const IndexMap& map, std::size_t domain_size) {
  return invert_neighborhoods(map.rows, domain_size);
}

std::string format_graph_dump(const EventGraph& graph, const KnnPyramid& pyramid) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& p = graph.positions[i];
    out << i << ',' << p.x << ',' << p.y << ',' << p.t << ',';
    if (graph.has_labels()) {
      out << graph.labels[i];
    } else {
      out << -1;
    }
    out << '\n';
  }
  for (const auto& level : pyramid.levels) {
    for (std::size_t i = 0; i < level.rows.rows(); ++i) {
      out << "M " << level.k << ' ' << i << ':';
      for (const auto j : level.rows.row(i)) out << ' ' << j;
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace gmnn
