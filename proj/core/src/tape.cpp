#include "gmnn/tape.hpp"

#include "gmnn/error.hpp"

namespace gmnn {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), nullptr, false, {}, {}});
  return {nodes_.size() - 1};
}

Var Tape::parameter(const Matrix& value) {
  if (const auto it = parameter_nodes_.find(&value); it != parameter_nodes_.end()) return {it->second};
  nodes_.push_back(Node{{}, &value, record_, {}, {}});
  parameter_nodes_.emplace(&value, nodes_.size() - 1);
  return {nodes_.size() - 1};
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  const bool keep = record_ && needs_grad;
  nodes_.push_back(Node{std::move(value), nullptr, keep, {}, keep ? std::move(backward) : Backward{}});
  return {nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.external != nullptr ? *n.external : n.value;
}

void Tape::release_since(std::size_t mark, Var keep) {
  if (record_) return;
  for (std::size_t i = mark; i < nodes_.size(); ++i) {
    if (i != keep.id) nodes_[i].value = Matrix{};
  }
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_.at(v.id);
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    const Matrix& val = value(v);
    if (g.rows() != val.rows() || g.cols() != val.cols()) throw ShapeError("gradient shape mismatch");
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) {
    const Matrix& val = value(v);
    n.grad = Matrix(val.rows(), val.cols());
  }
  return n.grad;
}

const Matrix* Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::backward(Var root, const Matrix& seed) {
  if (!record_) throw StructuralError("backward on a tape that does not record");
  const Matrix& root_value = value(root);
  if (!seed.same_shape(root_value)) throw ShapeError("backward seed shape mismatch");
  for (auto& n : nodes_) n.grad = Matrix();
  accumulate(root, seed);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

std::vector<std::pair<const Matrix*, Matrix>> Tape::parameter_gradients() const {
  std::vector<std::pair<const Matrix*, Matrix>> out;
  for (const auto& n : nodes_) {
    if (n.external != nullptr && !n.grad.empty()) out.emplace_back(n.external, n.grad);
  }
  return out;
}

}  // namespace gmnn
