#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "gmnn/index.hpp"
#include "gmnn/matrix.hpp"
#include "gmnn/tape.hpp"

namespace gmnn {

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

// Differentiable operations recorded on a tape. Shapes are checked eagerly
// and mismatches throw ShapeError.
namespace ops {

Var matmul(Tape& t, Var a, Var b);               // (N x K)(K x M)
Var add_row_vector(Tape& t, Var a, Var bias);    // bias is 1 x M
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, Scalar s);
Var activate(Tape& t, Var a, Activation activation);
Var concat_cols(Tape& t, Var a, Var b);
// Multiplies row r of `a` by the constant factors[r].
Var scale_rows(Tape& t, Var a, std::vector<Scalar> factors);
// Multiplies row r of `a` (P x C) by the scalar s(r, 0) of `s` (P x 1).
Var mul_row_scalars(Tape& t, Var a, Var s);
// Element-wise product of equally shaped matrices.
Var mul(Tape& t, Var a, Var b);
// sum_k weights[k] * inputs[k], accumulated in extended precision so equal
// inputs with weights summing to one come back within an ulp.
Var weighted_sum(Tape& t, std::span<const Var> inputs, std::span<const double> weights);
// Output row r is input row index[r]; backward scatter-adds.
Var gather_rows(Tape& t, Var a, std::span<const NodeIndex> index);
// Output row q sums input rows [offsets[q], offsets[q+1]).
Var segment_sum(Tape& t, Var a, std::span<const std::size_t> offsets);
// Column-wise softmax inside every row segment.
Var segment_softmax(Tape& t, Var a, std::span<const std::size_t> offsets);
// Max-subtracted softmax across the columns of each row.
Var softmax_rows(Tape& t, Var a);
// Output row j is the mean of input rows listed in inverse.row(j); rows with
// an empty list are zero and reported through `empty_rows` when given.
Var scatter_mean(Tape& t, Var a, const Neighborhoods& inverse, std::vector<bool>* empty_rows = nullptr);

}  // namespace ops

// Tape-free conveniences.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m);
Matrix gather_rows(const Matrix& m, std::span<const NodeIndex> index);
Matrix scatter_mean(const Matrix& m, const Neighborhoods& inverse, std::vector<bool>* empty_rows = nullptr);
Matrix concat_cols(const Matrix& a, const Matrix& b);

}  // namespace gmnn
