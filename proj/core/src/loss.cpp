#include "gmnn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "gmnn/error.hpp"

namespace gmnn {

namespace {

// Adds weight * CE(row) to the loss and weight * d CE / d row to grad.
double accumulate_row(const Matrix& logits, std::size_t i, Label label, double weight, Matrix& grad) {
  const auto row = logits.row(i);
  if (label < 0 || static_cast<std::size_t>(label) >= row.size()) {
    throw LabelError("label " + std::to_string(label) + " outside [0, " + std::to_string(row.size()) + ")");
  }
  const double peak = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (const Scalar v : row) total += std::exp(static_cast<double>(v) - peak);
  const double log_z = peak + std::log(total);
  auto g = grad.row(i);
  for (std::size_t c = 0; c < row.size(); ++c) {
    const double p = std::exp(static_cast<double>(row[c]) - log_z);
    g[c] += static_cast<Scalar>(weight * (p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)));
  }
  return weight * (log_z - static_cast<double>(row[static_cast<std::size_t>(label)]));
}

}  // namespace

LossResult cross_entropy_loss(const Matrix& logits, std::span<const Label> labels) {
  const std::size_t offsets[] = {0, labels.size()};
  return batch_cross_entropy(logits, labels, offsets);
}

LossResult batch_cross_entropy(const Matrix& logits, std::span<const Label> labels,
                               std::span<const std::size_t> offsets) {
  if (logits.rows() != labels.size()) throw ShapeError("one label per logit row is required");
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != labels.size()) {
    throw ShapeError("graph offsets must cover every logit row");
  }
  LossResult r{0.0, Matrix(logits.rows(), logits.cols())};
  const double graphs = static_cast<double>(offsets.size() - 1);
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    const std::size_t n = offsets[g + 1] - offsets[g];
    if (n == 0) continue;
    const double weight = 1.0 / (static_cast<double>(n) * graphs);
    for (std::size_t i = offsets[g]; i < offsets[g + 1]; ++i) r.loss += accumulate_row(logits, i, labels[i], weight, r.grad);
  }
  if (!std::isfinite(r.loss)) throw NumericError("loss is not finite");
  return r;
}

}  // namespace gmnn
