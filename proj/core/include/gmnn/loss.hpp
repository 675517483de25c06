#pragma once

#include <span>

#include "gmnn/matrix.hpp"
#include "gmnn/metrics.hpp"

namespace gmnn {

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits
};

// Mean over events of -log softmax(logits_i)[label_i].
LossResult cross_entropy_loss(const Matrix& logits, std::span<const Label> labels);

// Per-graph mean cross-entropy averaged over the graphs of a stacked batch;
// graph g owns rows [offsets[g], offsets[g + 1]).
LossResult batch_cross_entropy(const Matrix& logits, std::span<const Label> labels,
                               std::span<const std::size_t> offsets);

}  // namespace gmnn
