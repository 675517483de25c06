#pragma once

#include <span>
#include <vector>

#include "gmnn/matrix.hpp"

namespace gmnn {

struct SgdOptions {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
};

struct SgdState {
  SgdOptions options;
  std::vector<Matrix> velocity;  // lazily shaped on the first step
};

// Classic coupled weight decay:
//   v <- momentum * v + (g + weight_decay * theta)
//   theta <- theta - learning_rate * v
void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, SgdState& state);

}  // namespace gmnn
