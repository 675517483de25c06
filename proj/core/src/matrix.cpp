#include "gmnn/matrix.hpp"

#include <cmath>
#include <string>

#include "gmnn/error.hpp"

namespace gmnn {

Matrix::Matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (!same_shape(o)) throw ShapeError("matrix += shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

Matrix& Matrix::operator*=(Scalar s) {
  for (auto& v : values_) v *= s;
  return *this;
}

void check_finite(const Matrix& m, std::string_view where) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) {
      throw NumericError("non-finite value at " + std::string(where) + " (row " + std::to_string(i / std::max<std::size_t>(m.cols(), 1)) +
                         ")");
    }
  }
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
  }
  return worst;
}

}  // namespace gmnn
