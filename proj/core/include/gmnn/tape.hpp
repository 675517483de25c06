#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gmnn/matrix.hpp"

namespace gmnn {

struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;

  bool valid() const noexcept { return id != kInvalid; }
};

// Reverse-mode record of matrix operations. Every op appends one node holding
// its output value; nodes that depend on a parameter also keep a closure that
// pushes the output gradient to the inputs. Backward walks nodes in exact
// reverse order. A tape built with record = false stores values only.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const noexcept { return record_; }

  Var constant(Matrix value);
  // Leaf bound to an external parameter; `value` must outlive the tape.
  // Registering the same matrix twice returns the same leaf.
  Var parameter(const Matrix& value);

  Var push(Matrix value, bool needs_grad, Backward backward);

  const Matrix& value(Var v) const;
  // On a tape that does not record, frees the values of nodes created at or
  // after `mark` except `keep`. Recording tapes are left untouched.
  void release_since(std::size_t mark, Var keep);
  bool requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds `g` into the gradient of `v` (no-op for nodes without gradient).
  void accumulate(Var v, const Matrix& g);
  // Zero-initialized gradient buffer of `v`, for in-place accumulation.
  Matrix& grad_buffer(Var v);
  const Matrix* grad(Var v) const;

  void backward(Var root, const Matrix& seed);

  // Gradients of parameter leaves, keyed by the bound parameter matrix.
  // Parameters that received no gradient are omitted.
  std::vector<std::pair<const Matrix*, Matrix>> parameter_gradients() const;

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    bool needs_grad = false;
    Matrix grad;
    Backward backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, std::size_t> parameter_nodes_;
};

}  // namespace gmnn
