#include "gmnn/mlp.hpp"

#include <cmath>

#include "gmnn/error.hpp"

namespace gmnn {

std::size_t MlpParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.weight.size() + l.bias.size();
  return total;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("MLP has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols()) throw ShapeError("MLP bias shape mismatch");
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) throw ShapeError("MLP layer dimensions do not chain");
  }
}

MlpParams make_mlp(std::span<const std::size_t> dims, Activation activation, Activation final_activation,
                   std::mt19937_64& rng) {
  if (dims.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  MlpParams mlp;
  mlp.activation = activation;
  mlp.final_activation = final_activation;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    if (in == 0 || out == 0) throw ConfigError("MLP widths must be positive");
    // He scaling ahead of rectifiers, Glorot otherwise.
    const Activation act = i + 2 == dims.size() ? final_activation : activation;
    const bool rectified = act == Activation::kRelu || act == Activation::kLeakyRelu;
    const double limit = rectified ? std::sqrt(6.0 / static_cast<double>(in))
                                   : std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Linear layer{Matrix(in, out), Matrix(1, out)};
    for (auto& w : layer.weight.values()) w = static_cast<Scalar>(dist(rng));
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Var mlp_forward(Tape& t, const MlpParams& params, Var input) {
  params.validate();
  if (t.value(input).cols() != params.in_dim()) {
    throw ShapeError("MLP expects " + std::to_string(params.in_dim()) + " input columns, got " +
                     std::to_string(t.value(input).cols()));
  }
  Var x = input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    x = ops::matmul(t, x, t.parameter(l.weight));
    x = ops::add_row_vector(t, x, t.parameter(l.bias));
    x = ops::activate(t, x, i + 1 == params.layers.size() ? params.final_activation : params.activation);
  }
  return x;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& input) {
  Tape t(false);
  return t.value(mlp_forward(t, params, t.constant(input)));
}

Var neighborhood_mlp_forward(Tape& t, const MlpParams& params, Var input, const Neighborhoods& map,
                             NeighborNormalization normalization) {
  params.validate();
  if (map.rows() != t.value(input).rows()) throw ShapeError("neighborhood map rows must match input rows");
  if (t.value(input).cols() != params.in_dim()) throw ShapeError("neighborhood MLP input width mismatch");

  // 1 / c_ij per (i, j) pair, in map order.
  std::vector<Scalar> inv_norm(map.total());
  for (std::size_t i = 0; i < map.rows(); ++i) {
    const auto row = map.row(i);
    for (std::size_t r = 0; r < row.size(); ++r) {
      double c = static_cast<double>(row.size());
      if (normalization == NeighborNormalization::kSymmetricDegree) {
        c = std::sqrt(static_cast<double>(row.size()) * static_cast<double>(map.row_size(row[r])));
      }
      inv_norm[map.offsets()[i] + r] = static_cast<Scalar>(1.0 / c);
    }
  }

  Var x = input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Var pairs = ops::gather_rows(t, x, map.indices());
    pairs = ops::scale_rows(t, pairs, inv_norm);
    x = ops::segment_sum(t, pairs, map.offsets());
    x = ops::matmul(t, x, t.parameter(l.weight));
    x = ops::add_row_vector(t, x, t.parameter(l.bias));
    x = ops::activate(t, x, i + 1 == params.layers.size() ? params.final_activation : params.activation);
  }
  return x;
}

Matrix neighborhood_mlp_forward(const MlpParams& params, const Matrix& input, const Neighborhoods& map,
                                NeighborNormalization normalization) {
  Tape t(false);
  return t.value(neighborhood_mlp_forward(t, params, t.constant(input), map, normalization));
}

}  // namespace gmnn
