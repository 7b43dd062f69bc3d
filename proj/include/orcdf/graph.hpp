#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "orcdf/dataset.hpp"
#include "orcdf/error.hpp"
#include "orcdf/numerics/rng.hpp"
#include "orcdf/numerics/sparse.hpp"

namespace orcdf {

/// A typed student-exercise edge of the response graph.
struct ResponseEdge {
  std::int32_t student = 0;
  std::int32_t exercise = 0;
  bool right = false;

  bool operator==(const ResponseEdge&) const = default;
};

/// Tripartite response graph split into right and wrong subgraphs.
///
/// Node order is students [0, N), exercises [N, N+M), concepts [N+M, N+M+Z).
/// Both adjacencies are binary, symmetric and share the exercise-concept
/// block (Q); the student-exercise block holds right answers in `a_right`
/// and wrong answers in `a_wrong`.
class ResponseGraph {
 public:
  ResponseGraph() = default;

  static ResponseGraph build(const InteractionMatrix& interactions, const QMatrix& q) {
    if (interactions.cols() != q.n_exercises()) {
      throw ShapeError("response graph: interaction columns != Q rows");
    }
    std::vector<ResponseEdge> edges;
    edges.reserve(interactions.nnz());
    const CsrMatrix& m = interactions.entries;
    for (std::int64_t s = 0; s < m.rows; ++s) {
      const auto c = m.row_cols(s);
      const auto v = m.row_values(s);
      for (std::size_t k = 0; k < c.size(); ++k) {
        edges.push_back({static_cast<std::int32_t>(s), c[k], v[k] > 0.0});
      }
    }
    return from_edges(static_cast<std::int32_t>(m.rows), q, std::move(edges));
  }

  static ResponseGraph from_edges(std::int32_t n_students, const QMatrix& q, std::vector<ResponseEdge> edges) {
    ResponseGraph g;
    g.n_students_ = n_students;
    g.n_exercises_ = q.n_exercises();
    g.n_concepts_ = q.n_concepts();
    g.q_nnz_ = q.nnz();
    g.q_ = q;
    std::vector<CsrMatrix::Entry> right, wrong;
    auto both = [&](std::int32_t a, std::int32_t b) {
      right.push_back({a, b, 1.0});
      right.push_back({b, a, 1.0});
      wrong.push_back({a, b, 1.0});
      wrong.push_back({b, a, 1.0});
    };
    for (std::int32_t e = 0; e < g.n_exercises_; ++e) {
      for (auto k : q.concepts(e)) both(g.exercise_node(e), g.concept_node(k));
    }
    for (const auto& edge : edges) {
      if (edge.student < 0 || edge.student >= n_students || edge.exercise < 0 || edge.exercise >= g.n_exercises_) {
        throw ShapeError("response graph: edge outside node range");
      }
      auto& dst = edge.right ? right : wrong;
      const auto s = g.student_node(edge.student);
      const auto e = g.exercise_node(edge.exercise);
      dst.push_back({s, e, 1.0});
      dst.push_back({e, s, 1.0});
    }
    const auto n = g.n_nodes();
    g.a_right_ = CsrMatrix::from_entries(n, n, std::move(right));
    g.a_wrong_ = CsrMatrix::from_entries(n, n, std::move(wrong));
    g.edges_ = std::move(edges);
    return g;
  }

  std::int32_t n_students() const noexcept { return n_students_; }
  std::int32_t n_exercises() const noexcept { return n_exercises_; }
  std::int32_t n_concepts() const noexcept { return n_concepts_; }
  std::int32_t n_nodes() const noexcept { return n_students_ + n_exercises_ + n_concepts_; }

  std::int32_t student_node(std::int32_t s) const noexcept { return s; }
  std::int32_t exercise_node(std::int32_t e) const noexcept { return n_students_ + e; }
  std::int32_t concept_node(std::int32_t k) const noexcept { return n_students_ + n_exercises_ + k; }

  const CsrMatrix& a_right() const noexcept { return a_right_; }
  const CsrMatrix& a_wrong() const noexcept { return a_wrong_; }
  const std::vector<ResponseEdge>& response_edges() const noexcept { return edges_; }
  const QMatrix& q() const noexcept { return q_; }

  /// |E| = nnz(I) + nnz(Q): each undirected edge counted once, Q edges once.
  std::size_t edge_count() const noexcept { return edges_.size() + q_nnz_; }
  std::size_t response_edge_count() const noexcept { return edges_.size(); }
  std::size_t q_edge_count() const noexcept { return q_nnz_; }

  /// Binary adjacency of the undecomposed graph (right and wrong merged).
  CsrMatrix combined() const {
    auto e = a_right_.entries();
    for (const auto& w : a_wrong_.entries()) e.push_back(w);
    CsrMatrix m = CsrMatrix::from_entries(n_nodes(), n_nodes(), std::move(e));
    for (double& v : m.values) v = 1.0;
    return m;
  }

  /// Debug dump, one undirected edge per line: `src dst type`, type in {R, W, Q}.
  void dump(std::ostream& out) const {
    for (const auto& e : edges_) {
      out << student_node(e.student) << ' ' << exercise_node(e.exercise) << ' ' << (e.right ? 'R' : 'W') << '\n';
    }
    for (std::int32_t e = 0; e < n_exercises_; ++e) {
      const auto node = exercise_node(e);
      for (auto c : a_right_.row_cols(node)) {
        if (c >= n_students_ + n_exercises_) out << node << ' ' << c << " Q\n";
      }
    }
  }

 private:
  std::int32_t n_students_ = 0;
  std::int32_t n_exercises_ = 0;
  std::int32_t n_concepts_ = 0;
  std::size_t q_nnz_ = 0;
  CsrMatrix a_right_;
  CsrMatrix a_wrong_;
  std::vector<ResponseEdge> edges_;
  QMatrix q_;
};

/// D^{-1/2} A D^{-1/2} with D_ii the number of nonzeros in row i.
struct NormalizedAdjacency {
  CsrMatrix matrix;
  std::vector<double> degree;
};

inline NormalizedAdjacency normalize(const CsrMatrix& a) {
  if (a.rows != a.cols) throw ShapeError("normalize: adjacency must be square");
  NormalizedAdjacency out;
  out.degree.resize(static_cast<std::size_t>(a.rows));
  for (std::int64_t r = 0; r < a.rows; ++r) out.degree[static_cast<std::size_t>(r)] = static_cast<double>(a.row_nnz(r));
  out.matrix = a;
  for (std::int64_t r = 0; r < a.rows; ++r) {
    const auto cols = a.row_cols(r);
    const auto b = static_cast<std::size_t>(a.row_ptr[static_cast<std::size_t>(r)]);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double& v = out.matrix.values[b + k];
      if (v < 0.0) throw DataError("normalize: adjacency must be nonnegative");
      v /= std::sqrt(out.degree[static_cast<std::size_t>(r)] * out.degree[static_cast<std::size_t>(cols[k])]);
    }
  }
  return out;
}

/// Normalized right and wrong adjacencies of one graph, computed once.
struct SubgraphAdjacency {
  NormalizedAdjacency right;
  NormalizedAdjacency wrong;

  static SubgraphAdjacency of(const ResponseGraph& g) { return {normalize(g.a_right()), normalize(g.a_wrong())}; }
};

/// Record of one flip draw: which student-exercise edges changed type.
struct FlipPlan {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> flipped;  ///< (student, exercise)
};

/// Flips the type of each student-exercise edge with probability p_f.
/// Concept edges are never touched; the input graph is left unchanged.
inline std::pair<ResponseGraph, FlipPlan> flip(const ResponseGraph& g, double p_f, std::uint64_t seed) {
  if (p_f < 0.0 || p_f > 1.0) throw ConfigError("flip ratio must lie in [0, 1]");
  FlipPlan plan{p_f, seed, {}};
  std::vector<ResponseEdge> edges = g.response_edges();
  Rng rng(seed, "flip");
  for (auto& e : edges) {
    if (rng.bernoulli(p_f)) {
      e.right = !e.right;
      plan.flipped.emplace_back(e.student, e.exercise);
    }
  }
  return {ResponseGraph::from_edges(g.n_students(), g.q(), std::move(edges)), std::move(plan)};
}

}  // namespace orcdf
