#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gmnn/index.hpp"
#include "gmnn/ops.hpp"

namespace gmnn {

struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
};

struct MlpParams {
  std::vector<Linear> layers;
  Activation activation = Activation::kRelu;        // after hidden layers
  Activation final_activation = Activation::kRelu;  // after the last layer

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::size_t parameter_count() const;
  void validate() const;
};

// Uniform weights, +-sqrt(6 / fan_in) ahead of (leaky) ReLU and
// +-sqrt(6 / (fan_in + fan_out)) otherwise; zero biases.
MlpParams make_mlp(std::span<const std::size_t> dims, Activation activation, Activation final_activation,
                   std::mt19937_64& rng);

Var mlp_forward(Tape& t, const MlpParams& params, Var input);
Matrix mlp_forward(const MlpParams& params, const Matrix& input);

enum class NeighborNormalization { kMean, kSymmetricDegree };

// Every layer first averages neighbor rows, sum_j p_j / c_ij over the map
// row of i, then applies the affine map and activation. kMean uses
// c_ij = |N_i|; kSymmetricDegree uses sqrt(|N_i| |N_j|).
Var neighborhood_mlp_forward(Tape& t, const MlpParams& params, Var input, const Neighborhoods& map,
                             NeighborNormalization normalization = NeighborNormalization::kMean);
Matrix neighborhood_mlp_forward(const MlpParams& params, const Matrix& input, const Neighborhoods& map,
                                NeighborNormalization normalization = NeighborNormalization::kMean);

}  // namespace gmnn
