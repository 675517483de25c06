#include "gmnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gmnn/error.hpp"

namespace gmnn {
namespace {

constexpr Scalar kLeakySlope = Scalar(0.01);

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

// C += A * B
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    Scalar* ci = c.data() + i * m;
    const Scalar* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = ai[p];
      if (av == Scalar(0)) continue;
      const Scalar* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C += A * B^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* ai = a.data() + i * k;
    Scalar* ci = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const Scalar* bj = b.data() + j * k;
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C += A^T * B
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* ai = a.data() + i * k;
    const Scalar* bi = b.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar av = ai[p];
      if (av == Scalar(0)) continue;
      Scalar* cp = c.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += av * bi[j];
    }
  }
}

bool any_grad(const Tape& t, Var a) { return t.recording() && t.requires_grad(a); }
bool any_grad(const Tape& t, Var a, Var b) { return t.recording() && (t.requires_grad(a) || t.requires_grad(b)); }

void check_segments(std::span<const std::size_t> offsets, std::size_t rows) {
  require(!offsets.empty() && offsets.front() == 0 && offsets.back() == rows, "segment offsets do not cover input rows");
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

namespace ops {

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.cols() == bv.rows(), "matmul inner dimension mismatch");
  Matrix out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) gemm_nt(g, tp.value(b), tp.grad_buffer(a));
    if (tp.requires_grad(b)) gemm_tn(tp.value(a), g, tp.grad_buffer(b));
  });
}

Var add_row_vector(Tape& t, Var a, Var bias) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(bias);
  require(bv.rows() == 1 && bv.cols() == av.cols(), "bias width mismatch");
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  return t.push(std::move(out), any_grad(t, a, bias), [a, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(bias)) {
      Matrix& gb = tp.grad_buffer(bias);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb(0, c) += row[c];
      }
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  require(av.same_shape(t.value(b)), "add shape mismatch");
  Matrix out = av;
  out += t.value(b);
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var scale(Tape& t, Var a, Scalar s) {
  Matrix out = t.value(a);
  out *= s;
  return t.push(std::move(out), any_grad(t, a), [a, s](Tape& tp, const Matrix& g) {
    Matrix ga = g;
    ga *= s;
    tp.accumulate(a, ga);
  });
}

Var activate(Tape& t, Var a, Activation activation) {
  if (activation == Activation::kIdentity) return a;
  Matrix out = t.value(a);
  for (auto& v : out.values()) {
    switch (activation) {
      case Activation::kRelu:
        v = v > Scalar(0) ? v : Scalar(0);
        break;
      case Activation::kLeakyRelu:
        v = v > Scalar(0) ? v : kLeakySlope * v;
        break;
      case Activation::kTanh:
        v = std::tanh(v);
        break;
      case Activation::kIdentity:
        break;
    }
  }
  // push() appends exactly one node, so the output's id is known up front and
  // the derivative can be recovered from the stored output.
  const Var self{t.size()};
  return t.push(std::move(out), any_grad(t, a), [a, self, activation](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const Scalar yi = y.data()[i];
      switch (activation) {
        case Activation::kRelu:
          if (!(yi > Scalar(0))) ga.data()[i] = 0;
          break;
        case Activation::kLeakyRelu:
          if (!(yi > Scalar(0))) ga.data()[i] *= kLeakySlope;
          break;
        case Activation::kTanh:
          ga.data()[i] *= Scalar(1) - yi * yi;
          break;
        case Activation::kIdentity:
          break;
      }
    }
    tp.accumulate(a, ga);
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.rows() == bv.rows(), "concat_cols row count mismatch");
  const std::size_t ca = av.cols(), cb = bv.cols();
  Matrix out(av.rows(), ca + cb);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    std::copy(av.row(r).begin(), av.row(r).end(), row.begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), row.begin() + static_cast<std::ptrdiff_t>(ca));
  }
  return t.push(std::move(out), any_grad(t, a, b), [a, b, ca, cb](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) {
      Matrix& ga = tp.grad_buffer(a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
    }
    if (tp.requires_grad(b)) {
      Matrix& gb = tp.grad_buffer(b);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
    }
  });
}

Var scale_rows(Tape& t, Var a, std::vector<Scalar> factors) {
  const Matrix& av = t.value(a);
  require(factors.size() == av.rows(), "scale_rows factor count mismatch");
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (auto& v : out.row(r)) v *= factors[r];
  return t.push(std::move(out), any_grad(t, a), [a, factors = std::move(factors)](Tape& tp, const Matrix& g) {
    Matrix& ga = tp.grad_buffer(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto gr = g.row(r);
      auto out = ga.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) out[c] += gr[c] * factors[r];
    }
  });
}

Var mul_row_scalars(Tape& t, Var a, Var s) {
  const Matrix& av = t.value(a);
  const Matrix& sv = t.value(s);
  require(sv.cols() == 1 && sv.rows() == av.rows(), "mul_row_scalars expects a P x 1 scale");
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (auto& v : out.row(r)) v *= sv(r, 0);
  return t.push(std::move(out), any_grad(t, a, s), [a, s](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a);
    const Matrix& sv = tp.value(s);
    if (tp.requires_grad(a)) {
      Matrix& ga = tp.grad_buffer(a);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto gr = g.row(r);
        auto out = ga.row(r);
        for (std::size_t c = 0; c < gr.size(); ++c) out[c] += gr[c] * sv(r, 0);
      }
    }
    if (tp.requires_grad(s)) {
      Matrix& gs = tp.grad_buffer(s);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto gr = g.row(r);
        const auto ar = av.row(r);
        Scalar acc = 0;
        for (std::size_t c = 0; c < gr.size(); ++c) acc += gr[c] * ar[c];
        gs(r, 0) += acc;
      }
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.same_shape(bv), "mul shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) {
      Matrix& ga = tp.grad_buffer(a);
      const Matrix& bv = tp.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
    }
    if (tp.requires_grad(b)) {
      Matrix& gb = tp.grad_buffer(b);
      const Matrix& av = tp.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
}

Var weighted_sum(Tape& t, std::span<const Var> inputs, std::span<const double> weights) {
  require(!inputs.empty() && inputs.size() == weights.size(), "weighted_sum needs one weight per input");
  const Matrix& first = t.value(inputs[0]);
  bool needs = false;
  for (const Var v : inputs) {
    require(t.value(v).same_shape(first), "weighted_sum shape mismatch");
    needs = needs || any_grad(t, v);
  }
  Matrix out(first.rows(), first.cols());
  for (std::size_t e = 0; e < out.size(); ++e) {
    long double acc = 0.0L;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      acc += static_cast<long double>(weights[k]) * static_cast<long double>(t.value(inputs[k]).data()[e]);
    }
    out.data()[e] = static_cast<Scalar>(acc);
  }
  std::vector<Var> saved_inputs(inputs.begin(), inputs.end());
  std::vector<double> saved_weights(weights.begin(), weights.end());
  return t.push(std::move(out), needs,
                [in = std::move(saved_inputs), w = std::move(saved_weights)](Tape& tp, const Matrix& g) {
                  for (std::size_t k = 0; k < in.size(); ++k) {
                    if (!tp.requires_grad(in[k])) continue;
                    Matrix& gk = tp.grad_buffer(in[k]);
                    const auto wk = static_cast<Scalar>(w[k]);
                    for (std::size_t e = 0; e < g.size(); ++e) gk.data()[e] += wk * g.data()[e];
                  }
                });
}

Var gather_rows(Tape& t, Var a, std::span<const NodeIndex> index) {
  const Matrix& av = t.value(a);
  const std::size_t cols = av.cols();
  Matrix out(index.size(), cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= av.rows()) {
      throw BoundsError("gather index " + std::to_string(index[r]) + " outside " + std::to_string(av.rows()) + " rows");
    }
    const auto src = av.row(index[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const bool needs = any_grad(t, a);
  std::vector<NodeIndex> saved;
  if (needs) saved.assign(index.begin(), index.end());
  return t.push(std::move(out), needs, [a, idx = std::move(saved)](Tape& tp, const Matrix& g) {
    Matrix& ga = tp.grad_buffer(a);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto gr = g.row(r);
      auto dst = ga.row(idx[r]);
      for (std::size_t c = 0; c < gr.size(); ++c) dst[c] += gr[c];
    }
  });
}

Var segment_sum(Tape& t, Var a, std::span<const std::size_t> offsets) {
  const Matrix& av = t.value(a);
  check_segments(offsets, av.rows());
  const std::size_t segments = offsets.size() - 1;
  Matrix out(segments, av.cols());
  for (std::size_t q = 0; q < segments; ++q) {
    auto dst = out.row(q);
    for (std::size_t r = offsets[q]; r < offsets[q + 1]; ++r) {
      const auto src = av.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  }
  const bool needs = any_grad(t, a);
  std::vector<std::size_t> saved;
  if (needs) saved.assign(offsets.begin(), offsets.end());
  return t.push(std::move(out), needs, [a, off = std::move(saved)](Tape& tp, const Matrix& g) {
    Matrix& ga = tp.grad_buffer(a);
    for (std::size_t q = 0; q + 1 < off.size(); ++q) {
      const auto gq = g.row(q);
      for (std::size_t r = off[q]; r < off[q + 1]; ++r) {
        auto dst = ga.row(r);
        for (std::size_t c = 0; c < gq.size(); ++c) dst[c] += gq[c];
      }
    }
  });
}

Var segment_softmax(Tape& t, Var a, std::span<const std::size_t> offsets) {
  const Matrix& av = t.value(a);
  check_segments(offsets, av.rows());
  const std::size_t cols = av.cols();
  Matrix out(av.rows(), cols);
  for (std::size_t q = 0; q + 1 < offsets.size(); ++q) {
    const std::size_t begin = offsets[q], end = offsets[q + 1];
    if (begin == end) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      Scalar peak = av(begin, c);
      for (std::size_t r = begin + 1; r < end; ++r) peak = std::max(peak, av(r, c));
      Scalar total = 0;
      for (std::size_t r = begin; r < end; ++r) {
        out(r, c) = std::exp(av(r, c) - peak);
        total += out(r, c);
      }
      for (std::size_t r = begin; r < end; ++r) out(r, c) /= total;
    }
  }
  const bool needs = any_grad(t, a);
  std::vector<std::size_t> saved;
  if (needs) saved.assign(offsets.begin(), offsets.end());
  const Var self{t.size()};
  return t.push(std::move(out), needs, [a, self, off = std::move(saved)](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    Matrix& ga = tp.grad_buffer(a);
    for (std::size_t q = 0; q + 1 < off.size(); ++q) {
      for (std::size_t c = 0; c < y.cols(); ++c) {
        Scalar dot = 0;
        for (std::size_t r = off[q]; r < off[q + 1]; ++r) dot += g(r, c) * y(r, c);
        for (std::size_t r = off[q]; r < off[q + 1]; ++r) ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
    }
  });
}

Var softmax_rows(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const auto in = av.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const Scalar peak = *std::max_element(in.begin(), in.end());
    Scalar total = 0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - peak);
      total += o[c];
    }
    for (auto& v : o) v /= total;
  }
  const Var self{t.size()};
  return t.push(std::move(out), any_grad(t, a), [a, self](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(self);
    Matrix& ga = tp.grad_buffer(a);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      Scalar dot = 0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      auto dst = ga.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var scatter_mean(Tape& t, Var a, const Neighborhoods& inverse, std::vector<bool>* empty_rows) {
  const Var gathered = gather_rows(t, a, inverse.indices());
  const Var sums = segment_sum(t, gathered, inverse.offsets());
  std::vector<Scalar> factors(inverse.rows());
  if (empty_rows != nullptr) empty_rows->assign(inverse.rows(), false);
  for (std::size_t j = 0; j < inverse.rows(); ++j) {
    const std::size_t n = inverse.row_size(j);
    factors[j] = n == 0 ? Scalar(0) : Scalar(1) / static_cast<Scalar>(n);
    if (n == 0 && empty_rows != nullptr) (*empty_rows)[j] = true;
  }
  return scale_rows(t, sums, std::move(factors));
}

}  // namespace ops
}  // namespace gmnn

namespace gmnn {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Tape t(false);
  return t.value(ops::matmul(t, t.constant(a), t.constant(b)));
}

Matrix softmax_rows(const Matrix& m) {
  Tape t(false);
  return t.value(ops::softmax_rows(t, t.constant(m)));
}

Matrix gather_rows(const Matrix& m, std::span<const NodeIndex> index) {
  Tape t(false);
  return t.value(ops::gather_rows(t, t.constant(m), index));
}

Matrix scatter_mean(const Matrix& m, const Neighborhoods& inverse, std::vector<bool>* empty_rows) {
  Tape t(false);
  return t.value(ops::scatter_mean(t, t.constant(m), inverse, empty_rows));
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Tape t(false);
  return t.value(ops::concat_cols(t, t.constant(a), t.constant(b)));
}

}  // namespace gmnn
