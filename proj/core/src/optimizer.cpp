#include "gmnn/optimizer.hpp"

#include "gmnn/error.hpp"

namespace gmnn {

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, SgdState& state) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: parameter and gradient counts differ");
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const Matrix* p : params) state.velocity.emplace_back(p->rows(), p->cols());
  }
  if (state.velocity.size() != params.size()) throw ShapeError("sgd_step: optimizer state belongs to another model");

  const auto lr = static_cast<Scalar>(state.options.learning_rate);
  const auto mu = static_cast<Scalar>(state.options.momentum);
  const auto wd = static_cast<Scalar>(state.options.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& theta = *params[i];
    const Matrix& g = grads[i];
    Matrix& v = state.velocity[i];
    if (!theta.same_shape(g) || !theta.same_shape(v)) throw ShapeError("sgd_step: shape mismatch");
    for (std::size_t e = 0; e < theta.size(); ++e) {
      v.data()[e] = mu * v.data()[e] + (g.data()[e] + wd * theta.data()[e]);
      theta.data()[e] -= lr * v.data()[e];
    }
  }
}

}  // namespace gmnn
