#include "gmnn/ccm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gmnn/error.hpp"

namespace gmnn {

std::size_t CcmParams::parameter_count() const {
  std::size_t total = weights.size();
  for (const auto& l : levels) {
    total += l.channel_mix.parameter_count() + l.position.parameter_count() + l.score.parameter_count() +
             l.value.parameter_count();
  }
  if (inter_set) total += inter_set->parameter_count();
  return total;
}

void CcmParams::validate() const {
  if (levels.empty()) throw ShapeError("CCM block has no levels");
  if (weights.size() != levels.size()) throw ConfigError("CCM needs one level weight per kNN level");
  validate_level_weights(weights);
  for (const auto& l : levels) {
    if (l.score.in_dim() != l.channel_mix.out_dim() + l.position.out_dim()) {
      throw ShapeError("CCM score MLP input must be [g1 ; delta]");
    }
    if (l.position.in_dim() != 3) throw ShapeError("CCM position encoder takes 3D offsets");
    if (l.value.in_dim() != levels.front().value.in_dim() || l.value.out_dim() != levels.front().value.out_dim()) {
      throw ShapeError("CCM levels disagree on widths");
    }
  }
}

std::vector<double> ramp_level_weights(std::size_t levels) {
  const double total = static_cast<double>(levels * (levels + 1) / 2);
  std::vector<double> w(levels);
  for (std::size_t i = 0; i < levels; ++i) w[i] = static_cast<double>(i + 1) / total;
  return w;
}

void validate_level_weights(std::span<const double> weights) {
  double total = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("level weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("level weights must sum to 1");
}

CcmParams make_ccm(const CcmShape& shape, std::span<const double> weights, std::mt19937_64& rng) {
  if (weights.size() != shape.levels) throw ConfigError("CCM needs one level weight per kNN level");
  validate_level_weights(weights);
  CcmParams p;
  p.weights.assign(weights.begin(), weights.end());
  const std::size_t score_out = shape.per_channel_scores ? shape.out : 1;
  for (std::size_t k = 0; k < shape.levels; ++k) {
    CcmLevelParams level;
    const std::size_t g1[] = {shape.in, shape.score_width};
    const std::size_t delta[] = {3, shape.position_width, shape.position_width};
    const std::size_t g2[] = {shape.score_width + shape.position_width, score_out};
    const std::size_t g3[] = {shape.in, shape.out};
    level.channel_mix = make_mlp(g1, shape.activation, shape.activation, rng);
    level.position = make_mlp(delta, shape.activation, shape.activation, rng);
    level.score = make_mlp(g2, shape.activation, Activation::kIdentity, rng);
    level.value = make_mlp(g3, shape.activation, shape.activation, rng);
    p.levels.push_back(std::move(level));
  }
  if (shape.inter_set) {
    const std::size_t dims[] = {shape.out, shape.out};
    p.inter_set = make_mlp(dims, shape.activation, shape.activation, rng);
  }
  return p;
}

namespace {

// Pair-level score path given the already mixed source features.
Var pair_scores(Tape& t, const CcmLevelParams& params, const NeighborhoodPass& pass, Var mixed) {
  const Neighborhoods& rows = *pass.rows;
  Matrix offsets(rows.total(), 3);
  for (std::size_t q = 0; q < rows.rows(); ++q) {
    const Position& ei = pass.queries[q];
    const auto row = rows.row(q);
    for (std::size_t r = 0; r < row.size(); ++r) {
      if (row[r] >= pass.sources.size()) throw BoundsError("CCM neighbor index outside source set");
      const Position& ej = pass.sources[row[r]];
      const std::size_t p = rows.offsets()[q] + r;
      offsets(p, 0) = static_cast<Scalar>(ei.x - ej.x);
      offsets(p, 1) = static_cast<Scalar>(ei.y - ej.y);
      offsets(p, 2) = static_cast<Scalar>(ei.t - ej.t);
    }
  }
  const Var mixed_pairs = ops::gather_rows(t, mixed, rows.indices());
  const Var encoded = mlp_forward(t, params.position, t.constant(std::move(offsets)));
  return mlp_forward(t, params.score, ops::concat_cols(t, mixed_pairs, encoded));
}

Var pair_aggregate(Tape& t, Var scores, Var source_values, const Neighborhoods& rows) {
  const Var weights = ops::segment_softmax(t, scores, rows.offsets());
  const Var values = ops::gather_rows(t, source_values, rows.indices());
  const Var weighted =
      t.value(weights).cols() == 1 ? ops::mul_row_scalars(t, values, weights) : ops::mul(t, values, weights);
  return ops::segment_sum(t, weighted, rows.offsets());
}

// Pairs per chunk on the inference path; keeps the pair tensors near cache size.
constexpr std::size_t kInferencePairs = 2048;

// Same rows as the whole-level path, computed a query range at a time. Every
// op is row-local so the result is bitwise identical.
Var chunked_level(Tape& t, const CcmLevelParams& params, const NeighborhoodPass& pass, Var source_features) {
  const Neighborhoods& rows = *pass.rows;
  const Var mixed = mlp_forward(t, params.channel_mix, source_features);
  const Var values = mlp_forward(t, params.value, source_features);
  Matrix out;
  std::size_t q0 = 0;
  while (q0 < rows.rows()) {
    std::size_t q1 = q0 + 1;
    while (q1 < rows.rows() && rows.offsets()[q1 + 1] - rows.offsets()[q0] <= kInferencePairs) ++q1;
    const std::size_t base = rows.offsets()[q0];
    std::vector<std::size_t> offsets(q1 - q0 + 1);
    for (std::size_t q = q0; q <= q1; ++q) offsets[q - q0] = rows.offsets()[q] - base;
    const Neighborhoods chunk(std::move(offsets), std::vector<NodeIndex>(rows.indices().begin() + base,
                                                                          rows.indices().begin() + rows.offsets()[q1]));
    const std::size_t mark = t.size();
    const NeighborhoodPass part{pass.queries.subspan(q0, q1 - q0), pass.sources, &chunk};
    const Var scores = pair_scores(t, params, part, mixed);
    const Matrix& u = t.value(pair_aggregate(t, scores, values, chunk));
    if (out.empty()) out = Matrix(rows.rows(), u.cols());
    for (std::size_t q = q0; q < q1; ++q) {
      const auto src = u.row(q - q0);
      std::copy(src.begin(), src.end(), out.row(q).begin());
    }
    t.release_since(mark, Var{});
    q0 = q1;
  }
  if (out.empty()) out = Matrix(0, t.value(values).cols());
  return t.constant(std::move(out));
}

}  // namespace

Var ccm_scores(Tape& t, const CcmLevelParams& params, const NeighborhoodPass& pass, Var source_features) {
  const Neighborhoods& rows = *pass.rows;
  if (rows.rows() != pass.queries.size()) throw ShapeError("CCM map rows must match query count");
  if (t.value(source_features).rows() != pass.sources.size()) {
    throw ShapeError("CCM features must have one row per source node");
  }
  return pair_scores(t, params, pass, mlp_forward(t, params.channel_mix, source_features));
}

Var ccm_intra_set(Tape& t, const CcmLevelParams& params, Var scores, Var source_features,
                  const Neighborhoods& rows) {
  if (t.value(scores).rows() != rows.total()) throw ShapeError("CCM scores must have one row per pair");
  return pair_aggregate(t, scores, mlp_forward(t, params.value, source_features), rows);
}

Var ccm_level_aggregate(Tape& t, std::span<const Var> levels, std::span<const double> weights) {
  if (levels.size() != weights.size()) throw ShapeError("one level weight per level output is required");
  return ops::weighted_sum(t, levels, weights);
}

Var ccm_inter_set(Tape& t, const MlpParams& inter_set, Var u, const InverseIndexMap& inverse) {
  if (inverse.rows.rows() != t.value(u).rows()) throw ShapeError("inverse map rows must match node count");
  std::vector<bool> empty;
  const Var pooled = ops::scatter_mean(t, u, inverse.rows, &empty);
  std::vector<Scalar> mask(empty.size());
  for (std::size_t j = 0; j < empty.size(); ++j) mask[j] = empty[j] ? Scalar(0) : Scalar(1);
  const Var mixed = ops::scale_rows(t, mlp_forward(t, inter_set, pooled), std::move(mask));
  return ops::add(t, u, mixed);
}

Var ccm_forward(Tape& t, const CcmParams& params, std::span<const Position> queries,
                std::span<const Position> sources, std::span<const Neighborhoods* const> level_rows,
                Var source_features, const InverseIndexMap* inverse) {
  params.validate();
  if (level_rows.size() != params.levels.size()) throw ShapeError("CCM block expects one map per level");
  const std::size_t block_mark = t.size();
  std::vector<Var> outputs;
  outputs.reserve(level_rows.size());
  for (std::size_t k = 0; k < level_rows.size(); ++k) {
    const std::size_t mark = t.size();
    const NeighborhoodPass pass{queries, sources, level_rows[k]};
    if (t.recording()) {
      const Var scores = ccm_scores(t, params.levels[k], pass, source_features);
      outputs.push_back(ccm_intra_set(t, params.levels[k], scores, source_features, *level_rows[k]));
    } else {
      if (level_rows[k]->rows() != queries.size()) throw ShapeError("CCM map rows must match query count");
      if (t.value(source_features).rows() != sources.size()) {
        throw ShapeError("CCM features must have one row per source node");
      }
      outputs.push_back(chunked_level(t, params.levels[k], pass, source_features));
    }
    // Inference keeps only the per-level output; the pair tensors dominate memory.
    t.release_since(mark, outputs.back());
  }
  Var u = ccm_level_aggregate(t, outputs, params.weights);
  if (params.inter_set && inverse != nullptr) u = ccm_inter_set(t, *params.inter_set, u, *inverse);
  t.release_since(block_mark, u);
  return u;
}

}  // namespace gmnn
