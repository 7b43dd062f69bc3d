#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orcdf/error.hpp"
#include "orcdf/numerics/sparse.hpp"
#include "orcdf/numerics/tensor.hpp"

namespace orcdf {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode computation record. Nodes are appended in evaluation order,
/// which is a topological order of the DAG; backward walks it in reverse.
/// One tape serves one forward/backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  struct Options {
    bool check_finite = false;
    bool no_grad = false;  ///< record values only; parameters become constants
    const ParameterList* trainable = nullptr;  ///< if set, other parameters become constants
  };

  Tape() = default;
  explicit Tape(Options opts) : opts_(opts) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) {
    return push(std::move(value), false, nullptr, {}, "constant");
  }

  /// Reads a parameter. Its gradient is added into `t.grad` by backward().
  Var leaf(Tensor& t) {
    bool needs = t.requires_grad && !opts_.no_grad;
    if (needs && opts_.trainable != nullptr) {
      needs = std::find(opts_.trainable->begin(), opts_.trainable->end(), &t) != opts_.trainable->end();
    }
    Var v = push(t.value, needs, nullptr, {}, t.name);
    nodes_[v.id_].param = &t;
    return v;
  }

  /// Records an op result. `inputs` decide whether the node needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn, std::string_view op) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(fn), op);
  }

  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn, std::string_view op) {
    bool needs = false;
    for (const Var& in : inputs) {
      if (in.tape_ != this) throw ContractError("operand recorded on a different tape");
      needs = needs || nodes_[in.id_].needs_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{}, {}, op);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& value(Var v) const { return nodes_[v.id_].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id_].grad; }
  bool needs_grad(Var v) const { return nodes_[v.id_].needs_grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  template <class Expr>
  void accumulate(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Grad buffer of node `id`, allocated as zeros on first touch.
  Matrix& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Propagates d(root)/d(node) for a 1x1 root and adds leaf gradients into
  /// their parameters. May be called once per tape.
  void backward(Var root) {
    if (root.tape_ != this) throw ContractError("backward root from another tape");
    if (backward_done_) throw ContractError("backward called twice on the same tape");
    if (value(root).size() != 1) throw ShapeError("backward root must be a scalar");
    backward_done_ = true;
    nodes_[root.id_].grad = Matrix::Ones(1, 1);
    for (std::size_t i = root.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) {
        // The closure may touch other nodes; keep this node's grad alive locally.
        const Matrix g = n.grad;
        n.backward(*this, g);
      }
    }
    for (Node& n : nodes_) {
      if (n.param == nullptr || !n.needs_grad) continue;
      if (!n.param->has_grad()) n.param->zero_grad();
      if (n.grad.size() != 0) n.param->grad += n.grad;
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

  /// Multiply-add count of every sparse product recorded on this tape.
  std::uint64_t spmm_multiply_adds() const noexcept { return spmm_macs_; }
  void count_spmm(std::uint64_t macs) noexcept { spmm_macs_ += macs; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Matrix value, bool needs, BackwardFn fn, std::span<const Var>, std::string_view op) {
    if (opts_.check_finite && !value.allFinite()) {
      throw NumericalError("non-finite value produced by '" + std::string(op) + "' (node " +
                           std::to_string(nodes_.size()) + ")");
    }
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(fn), nullptr, needs});
    return Var(this, nodes_.size() - 1);
  }

  Options opts_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::uint64_t spmm_macs_ = 0;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// ---------------------------------------------------------------------------
// Differentiable operations.

namespace detail {

inline void require(bool ok, const char* op, const char* what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

inline constexpr double kActivationClamp = 40.0;

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::require(a.cols() == b.rows(), "matmul", "inner dimensions differ");
  Matrix out = a.value() * b.value();
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  }, "matmul");
}

inline Var add(Var a, Var b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add", "shape mismatch");
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  }, "add");
}

inline Var sub(Var a, Var b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", "shape mismatch");
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  }, "sub");
}

inline Var scale(Var a, double c) {
  const auto ia = a.id();
  return a.tape()->record(a.value() * c, {a}, [ia, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, g * c);
  }, "scale");
}

/// x + b with b a 1 x cols row added to every row.
inline Var add_row_broadcast(Var x, Var b) {
  detail::require(b.rows() == 1 && b.cols() == x.cols(), "add_row_broadcast", "bias must be 1 x cols");
  Matrix out = x.value().rowwise() + b.value().row(0);
  const auto ix = x.id(), ib = b.id();
  return x.tape()->record(std::move(out), {x, b}, [ix, ib](Tape& t, const Matrix& g) {
    t.accumulate(ix, g);
    if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
  }, "add_row_broadcast");
}

/// x + b with b a rows x 1 column added across every column.
inline Var add_col_broadcast(Var x, Var b) {
  detail::require(b.cols() == 1 && b.rows() == x.rows(), "add_col_broadcast", "bias must be rows x 1");
  Matrix out = x.value().colwise() + b.value().col(0);
  const auto ix = x.id(), ib = b.id();
  return x.tape()->record(std::move(out), {x, b}, [ix, ib](Tape& t, const Matrix& g) {
    t.accumulate(ix, g);
    if (t.needs_grad(ib)) t.accumulate(ib, g.rowwise().sum());
  }, "add_col_broadcast");
}

/// Scales row i of x by s(i, 0).
inline Var mul_col_broadcast(Var x, Var s) {
  detail::require(s.cols() == 1 && s.rows() == x.rows(), "mul_col_broadcast", "scale must be rows x 1");
  Matrix out = x.value().array().colwise() * s.value().col(0).array();
  const auto ix = x.id(), is = s.id();
  return x.tape()->record(std::move(out), {x, s}, [ix, is](Tape& t, const Matrix& g) {
    if (t.needs_grad(ix)) {
      t.accumulate(ix, (g.array().colwise() * t.value(is).col(0).array()).matrix());
    }
    if (t.needs_grad(is)) {
      t.accumulate(is, (g.array() * t.value(ix).array()).rowwise().sum().matrix());
    }
  }, "mul_col_broadcast");
}

inline Var mul(Var a, Var b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "mul", "shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value());
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  }, "mul");
}

/// Elementwise product with a constant matrix (masks, Q rows).
inline Var mul_const(Var a, const Matrix& c) {
  detail::require(a.rows() == c.rows() && a.cols() == c.cols(), "mul_const", "shape mismatch");
  Matrix out = a.value().cwiseProduct(c);
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseProduct(c));
  }, "mul_const");
}

inline Var sigmoid(Var x) {
  const auto ix = x.id();
  Matrix y = x.value().unaryExpr([](double v) {
    v = std::clamp(v, -detail::kActivationClamp, detail::kActivationClamp);
    return 1.0 / (1.0 + std::exp(-v));
  });
  Matrix dy = (y.array() * (1.0 - y.array())).matrix();
  return x.tape()->record(std::move(y), {x}, [ix, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(ix, g.cwiseProduct(dy));
  }, "sigmoid");
}

inline Var tanh(Var x) {
  const auto ix = x.id();
  Matrix y = x.value().unaryExpr([](double v) {
    return std::tanh(std::clamp(v, -detail::kActivationClamp, detail::kActivationClamp));
  });
  Matrix dy = (1.0 - y.array().square()).matrix();
  return x.tape()->record(std::move(y), {x}, [ix, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(ix, g.cwiseProduct(dy));
  }, "tanh");
}

inline Var leaky_relu(Var x, double slope) {
  const auto ix = x.id();
  Matrix y = x.value().unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
  return x.tape()->record(std::move(y), {x}, [ix, slope](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value(ix);
    Matrix d = g;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (xv.data()[i] < 0.0) d.data()[i] *= slope;
    }
    t.accumulate(ix, d);
  }, "leaky_relu");
}

inline Var exp(Var x) {
  const auto ix = x.id();
  Matrix y = x.value().array().min(detail::kActivationClamp).exp().matrix();
  Matrix yc = y;
  return x.tape()->record(std::move(y), {x}, [ix, yc = std::move(yc)](Tape& t, const Matrix& g) {
    t.accumulate(ix, g.cwiseProduct(yc));
  }, "exp");
}

/// Per-row dot product: rows x 1.
inline Var row_dot(Var a, Var b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "row_dot", "shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, (t.value(ib).array().colwise() * g.col(0).array()).matrix());
    if (t.needs_grad(ib)) t.accumulate(ib, (t.value(ia).array().colwise() * g.col(0).array()).matrix());
  }, "row_dot");
}

inline Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const auto ix = x.id();
  const auto r = x.rows(), c = x.cols();
  return x.tape()->record(std::move(out), {x}, [ix, r, c](Tape& t, const Matrix& g) {
    t.accumulate(ix, Matrix::Constant(r, c, g(0, 0)));
  }, "sum");
}

inline Var mean(Var x) {
  detail::require(x.value().size() > 0, "mean", "empty operand");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

inline Var concat_rows(std::span<const Var> parts) {
  detail::require(!parts.empty(), "concat_rows", "no operands");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const Var& p : parts) {
    detail::require(p.cols() == cols, "concat_rows", "column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts[0].tape()->record(std::move(out), parts, [ids, offsets](Tape& t, const Matrix& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) t.accumulate(ids[k], g.middleRows(offsets[k], t.value(ids[k]).rows()));
    }
  }, "concat_rows");
}

/// Selects rows by index (repeats allowed); backward scatters with summation.
inline Var gather_rows(Var x, std::vector<std::int32_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  const Matrix& xv = x.value();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    detail::require(idx[i] >= 0 && idx[i] < xv.rows(), "gather_rows", "index out of range");
    out.row(static_cast<Eigen::Index>(i)) = xv.row(idx[i]);
  }
  const auto ix = x.id();
  return x.tape()->record(std::move(out), {x}, [ix, idx = std::move(idx)](Tape& t, const Matrix& g) {
    if (!t.needs_grad(ix)) return;
    Matrix& dst = t.grad_buffer(ix);
    for (std::size_t i = 0; i < idx.size(); ++i) dst.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  }, "gather_rows");
}

/// Sparse (constant) times dense. Adds nnz * cols to the tape's multiply-add count.
/// `a` is captured by reference and must outlive the tape.
inline Var spmm(const CsrMatrix& a, Var x) {
  detail::require(a.cols == x.rows(), "spmm", "adjacency columns != operand rows");
  Matrix out;
  csr_multiply(a, x.value(), out);
  Tape* tp = x.tape();
  tp->count_spmm(static_cast<std::uint64_t>(a.nnz()) * static_cast<std::uint64_t>(x.cols()));
  const auto ix = x.id();
  return tp->record(std::move(out), {x}, [ix, &a](Tape& t, const Matrix& g) {
    if (!t.needs_grad(ix)) return;
    csr_transpose_multiply_add(a, g, t.grad_buffer(ix));
  }, "spmm");
}

inline constexpr double kProbabilityClamp = 1e-9;

/// Summed binary cross-entropy over a column of probabilities.
inline Var bce_sum(Var pred, std::span<const double> labels) {
  detail::require(pred.cols() == 1 && static_cast<std::size_t>(pred.rows()) == labels.size(), "bce_sum",
                  "predictions and labels differ in length");
  const Matrix& p = pred.value();
  Matrix dp(p.rows(), 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double q = std::clamp(p(i, 0), kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double r = labels[static_cast<std::size_t>(i)];
    loss -= r * std::log(q) + (1.0 - r) * std::log(1.0 - q);
    dp(i, 0) = -r / q + (1.0 - r) / (1.0 - q);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  const auto ip = pred.id();
  return pred.tape()->record(std::move(out), {pred}, [ip, dp = std::move(dp)](Tape& t, const Matrix& g) {
    t.accumulate(ip, dp * g(0, 0));
  }, "bce_sum");
}

enum class ConsistencyForm {
  Cosine,  ///< -sum cos(h', h) / tau; bounded.
  Dot,     ///< -sum h'.h / tau; the unbounded literal form.
};

struct ConsistencyLoss {
  Var loss;
  std::size_t skipped_rows = 0;  ///< zero-norm rows that contributed nothing
};

/// -sum over the first `rows` rows of sim(h'_i, h_i) / tau.
inline ConsistencyLoss consistency_loss(Var h, Var h_flipped, Eigen::Index rows, double tau,
                                        ConsistencyForm form = ConsistencyForm::Cosine) {
  detail::require(h.rows() == h_flipped.rows() && h.cols() == h_flipped.cols(), "consistency_loss",
                  "embeddings differ in shape");
  detail::require(rows >= 0 && rows <= h.rows(), "consistency_loss", "row count out of range");
  if (!(tau > 0.0)) throw ConfigError("consistency_loss: tau must be positive");
  const Matrix& a = h.value();
  const Matrix& b = h_flipped.value();
  Matrix ga = Matrix::Zero(a.rows(), a.cols());
  Matrix gb = Matrix::Zero(b.rows(), b.cols());
  double loss = 0.0;
  std::size_t skipped = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto ai = a.row(i);
    const auto bi = b.row(i);
    const double dot = ai.dot(bi);
    if (form == ConsistencyForm::Dot) {
      loss -= dot / tau;
      ga.row(i) = -bi / tau;
      gb.row(i) = -ai / tau;
      continue;
    }
    const double na = ai.norm();
    const double nb = bi.norm();
    if (na == 0.0 || nb == 0.0) {
      ++skipped;
      continue;
    }
    const double c = dot / (na * nb);
    loss -= c / tau;
    ga.row(i) = -(bi / (na * nb) - c * ai / (na * na)) / tau;
    gb.row(i) = -(ai / (na * nb) - c * bi / (nb * nb)) / tau;
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  const auto ia = h.id(), ib = h_flipped.id();
  Var v = h.tape()->record(std::move(out), {h, h_flipped},
                           [ia, ib, ga = std::move(ga), gb = std::move(gb)](Tape& t, const Matrix& g) {
                             if (t.needs_grad(ia)) t.accumulate(ia, ga * g(0, 0));
                             if (t.needs_grad(ib)) t.accumulate(ib, gb * g(0, 0));
                           },
                           "consistency_loss");
  return {v, skipped};
}

}  // namespace orcdf
