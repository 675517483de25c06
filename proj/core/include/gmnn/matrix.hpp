#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace gmnn {

#ifdef GMNN_SCALAR_FLOAT
using Scalar = float;
#else
using Scalar = double;
#endif

// Dense row-major matrix; rows are nodes (or node pairs), columns channels.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Scalar fill = Scalar{0})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<Scalar>> rows);

  static Matrix zeros_like(const Matrix& m) { return Matrix(m.rows_, m.cols_); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty() && rows_ == 0; }

  Scalar& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  Scalar operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<Scalar> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const Scalar> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

  Scalar* data() noexcept { return values_.data(); }
  const Scalar* data() const noexcept { return values_.data(); }
  std::span<Scalar> values() noexcept { return values_; }
  std::span<const Scalar> values() const noexcept { return values_; }

  void fill(Scalar v) { std::fill(values_.begin(), values_.end(), v); }
  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator*=(Scalar s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Scalar> values_;
};

// Throws NumericError when any entry is NaN or infinite.
void check_finite(const Matrix& m, std::string_view where);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace gmnn
