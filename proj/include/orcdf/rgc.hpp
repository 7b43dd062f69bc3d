#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "orcdf/error.hpp"
#include "orcdf/graph.hpp"
#include "orcdf/numerics/optim.hpp"
#include "orcdf/numerics/tape.hpp"

namespace orcdf {

enum class Activation { Tanh, LeakyRelu, Identity };

inline constexpr double kLeakySlope = 0.1;

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "leaky_relu") return Activation::LeakyRelu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::Tanh: return tanh(x);
    case Activation::LeakyRelu: return leaky_relu(x, kLeakySlope);
    case Activation::Identity: return x;
  }
  return x;
}

/// Base embeddings H0 (students, exercises, concepts stacked) and the two
/// channel weights of the response-aware convolution.
struct RgcParams {
  Tensor h0;
  Tensor w_rc;
  Tensor w_wc;
  int layers = 3;
  Activation activation = Activation::Tanh;

  static RgcParams init(std::int32_t n_nodes, std::int32_t dim, int layers, Activation act, Rng& rng) {
    if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
    if (layers < 1) throw ConfigError("layer count must be >= 1");
    RgcParams p;
    p.h0 = Tensor("rgc.h0", xavier_init(n_nodes, dim, rng));
    p.w_rc = Tensor("rgc.w_rc", xavier_init(dim, dim, rng));
    p.w_wc = Tensor("rgc.w_wc", xavier_init(dim, dim, rng));
    p.layers = layers;
    p.activation = act;
    return p;
  }

  ParameterList parameters() { return {&h0, &w_rc, &w_wc}; }
};

/// Layer-mean pooled output; `layers` keeps H_F(0..L) for diagnostics.
struct PooledEmbedding {
  Var h;
  std::vector<Var> layers;
};

/// Response-aware graph convolution. Each layer convolves the previous fused
/// state over both subgraphs and fuses the channels:
///   H_F(l) = phi(A_R H_F(l-1) W_rc + A_W H_F(l-1) W_wc),  H_F(0) = H0,
/// and the output is the mean of H_F(0..L).
inline PooledEmbedding propagate(Var h0, Var w_rc, Var w_wc, int layers, Activation act,
                                 const NormalizedAdjacency& right, const NormalizedAdjacency& wrong) {
  if (layers < 1) throw ConfigError("layer count must be >= 1");
  if (right.matrix.rows != h0.rows() || wrong.matrix.rows != h0.rows()) {
    throw ShapeError("propagate: adjacency dimension != node count");
  }
  if (w_rc.rows() != h0.cols() || w_rc.cols() != h0.cols() || w_wc.rows() != h0.cols() ||
      w_wc.cols() != h0.cols()) {
    throw ShapeError("propagate: channel weights must be d x d");
  }
  PooledEmbedding out;
  out.layers.push_back(h0);
  Var acc = h0;
  for (int l = 1; l <= layers; ++l) {
    const Var prev = out.layers.back();
    const Var r = matmul(spmm(right.matrix, prev), w_rc);
    const Var w = matmul(spmm(wrong.matrix, prev), w_wc);
    const Var fused = activate(add(r, w), act);
    out.layers.push_back(fused);
    acc = add(acc, fused);
  }
  out.h = scale(acc, 1.0 / static_cast<double>(layers + 1));
  if (!out.h.value().allFinite()) {
    throw NumericalError("propagate: non-finite pooled embedding (layers=" + std::to_string(layers) + ")");
  }
  return out;
}

inline PooledEmbedding propagate(Tape& tape, RgcParams& p, const SubgraphAdjacency& adj) {
  return propagate(tape.leaf(p.h0), tape.leaf(p.w_rc), tape.leaf(p.w_wc), p.layers, p.activation, adj.right,
                   adj.wrong);
}

/// Single-channel convolution over the undecomposed graph:
///   H_F(l) = phi(A H_F(l-1) W), mean-pooled like propagate().
inline PooledEmbedding propagate_undecomposed(Var h0, Var w, int layers, Activation act,
                                              const NormalizedAdjacency& adj) {
  if (layers < 1) throw ConfigError("layer count must be >= 1");
  if (adj.matrix.rows != h0.rows()) throw ShapeError("propagate: adjacency dimension != node count");
  PooledEmbedding out;
  out.layers.push_back(h0);
  Var acc = h0;
  for (int l = 1; l <= layers; ++l) {
    const Var fused = activate(matmul(spmm(adj.matrix, out.layers.back()), w), act);
    out.layers.push_back(fused);
    acc = add(acc, fused);
  }
  out.h = scale(acc, 1.0 / static_cast<double>(layers + 1));
  return out;
}

/// Maps d-wide embeddings to Z-wide concept space: H W_t + b_t, with b_t one
/// scalar per node broadcast across the columns.
struct TransformParams {
  Tensor w_t;
  Tensor b_t;

  static TransformParams init(std::int32_t n_nodes, std::int32_t dim, std::int32_t n_concepts, Rng& rng) {
    TransformParams t;
    t.w_t = Tensor("transform.w_t", xavier_init(dim, n_concepts, rng));
    t.b_t = Tensor("transform.b_t", Matrix::Zero(n_nodes, 1));
    return t;
  }

  ParameterList parameters() { return {&w_t, &b_t}; }
};

inline Var transform(Var h, Var w_t, Var b_t) {
  if (w_t.rows() != h.cols()) throw ShapeError("transform: W_t rows != embedding width");
  if (b_t.rows() != h.rows() || b_t.cols() != 1) throw ShapeError("transform: b_t must be nodes x 1");
  return add_col_broadcast(matmul(h, w_t), b_t);
}

inline Var transform(Tape& tape, Var h, TransformParams& t) {
  return transform(h, tape.leaf(t.w_t), tape.leaf(t.b_t));
}

// ---------------------------------------------------------------------------
// Pairwise difference decomposition for one identity layer.

struct DecompositionCheck {
  double pooled = 0.0;      ///< ||H_s1 - H_s2||^2 from propagate()
  double decomposed = 0.0;  ///< 1/4 ||dH0 + dH1(R) + dH1(W)||^2 from neighbour sums
  bool pass = false;
};

/// Runs a one-layer convolution with identity weights and activation and no
/// normalization on `g`, then checks that the squared distance between the
/// pooled rows of students 0 and 1 equals one quarter of the squared sum of
/// the individual term and the right/wrong neighbourhood terms.
inline DecompositionCheck mnd_decomposition_check(const ResponseGraph& g, const Matrix& h0, double tol = 1e-12) {
  if (g.n_students() < 2) throw ConfigError("decomposition check needs two students");
  if (h0.rows() != g.n_nodes()) throw ShapeError("decomposition check: H0 rows != node count");
  const auto d = h0.cols();
  const NormalizedAdjacency raw_r{g.a_right(), {}};
  const NormalizedAdjacency raw_w{g.a_wrong(), {}};
  Tape tape;
  const Var eye = tape.constant(Matrix::Identity(d, d));
  const auto pooled = propagate(tape.constant(h0), eye, eye, 1, Activation::Identity, raw_r, raw_w);
  const Matrix& h = pooled.h.value();
  DecompositionCheck out;
  out.pooled = (h.row(0) - h.row(1)).squaredNorm();

  auto neighbour_sum = [&](const CsrMatrix& a, std::int32_t s) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (auto c : a.row_cols(s)) acc += h0.row(c);
    return acc;
  };
  const Eigen::RowVectorXd term = (h0.row(0) - h0.row(1)) +
                                  (neighbour_sum(g.a_right(), 0) - neighbour_sum(g.a_right(), 1)) +
                                  (neighbour_sum(g.a_wrong(), 0) - neighbour_sum(g.a_wrong(), 1));
  out.decomposed = 0.25 * term.squaredNorm();
  out.pass = std::abs(out.pooled - out.decomposed) <= tol * std::max(1.0, std::abs(out.decomposed));
  return out;
}

}  // namespace orcdf
