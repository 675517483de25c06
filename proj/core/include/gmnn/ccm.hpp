#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gmnn/index.hpp"
#include "gmnn/mlp.hpp"

namespace gmnn {

// Learnable pieces of one kNN level of a collaborative contextual mixing layer.
struct CcmLevelParams {
  MlpParams channel_mix;  // g1: features -> score features
  MlpParams position;     // delta: relative position (3) -> position features
  MlpParams score;        // g2: [g1 ; delta] -> 1 (or out channels when scoring per channel)
  MlpParams value;        // g3: features -> output features
};

struct CcmParams {
  std::vector<CcmLevelParams> levels;
  std::vector<double> weights;       // one per level, non-negative, summing to 1
  std::optional<MlpParams> inter_set;  // present on mixer blocks

  std::size_t in_dim() const { return levels.front().value.in_dim(); }
  std::size_t out_dim() const { return levels.front().value.out_dim(); }
  bool per_channel_scores() const { return levels.front().score.out_dim() != 1; }
  std::size_t parameter_count() const;
  void validate() const;
};

struct CcmShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t score_width = 16;
  std::size_t position_width = 16;
  std::size_t levels = 4;
  bool inter_set = false;
  bool per_channel_scores = false;
  Activation activation = Activation::kRelu;
};

CcmParams make_ccm(const CcmShape& shape, std::span<const double> weights, std::mt19937_64& rng);

// Linear ramp w_i proportional to i; for four levels this is 0.1, 0.2, 0.3, 0.4.
std::vector<double> ramp_level_weights(std::size_t levels);
void validate_level_weights(std::span<const double> weights);

// Geometry of one neighborhood pass: for query q, rows.row(q) lists indices
// into the source set.
struct NeighborhoodPass {
  std::span<const Position> queries;
  std::span<const Position> sources;
  const Neighborhoods* rows = nullptr;
};

// Scores s_j = g2([g1(x_j); delta(e_i - e_j)]) for every (query, neighbor)
// pair, flattened in row order: P x 1 (P x out when scoring per channel).
Var ccm_scores(Tape& t, const CcmLevelParams& params, const NeighborhoodPass& pass, Var source_features);

// u_i = sum_j softmax_j(s) * g3(x_j), softmax taken over each query's row.
Var ccm_intra_set(Tape& t, const CcmLevelParams& params, Var scores, Var source_features,
                  const Neighborhoods& rows);

// u = sum_k w_k u_k, accumulated in extended precision.
Var ccm_level_aggregate(Tape& t, std::span<const Var> levels, std::span<const double> weights);

// Each node receives the mean of u over the sets containing it, passed
// through the inter-set MLP and added to u. Nodes contained in no set keep u.
Var ccm_inter_set(Tape& t, const MlpParams& inter_set, Var u, const InverseIndexMap& inverse);

// Intra-set mixing at every level, weighted aggregation, then inter-set
// mixing when the block has an inter-set MLP and `inverse` is given.
Var ccm_forward(Tape& t, const CcmParams& params, std::span<const Position> queries,
                std::span<const Position> sources, std::span<const Neighborhoods* const> level_rows,
                Var source_features, const InverseIndexMap* inverse = nullptr);

}  // namespace gmnn
