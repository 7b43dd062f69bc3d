#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "orcdf/error.hpp"

namespace orcdf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Compressed-row sparse matrix with sorted, unique column indices per row.
struct CsrMatrix {
  struct Entry {
    std::int32_t row;
    std::int32_t col;
    double value;
  };

  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> col_idx;
  std::vector<double> values;

  /// Builds from unsorted entries. Repeated (row, col) coordinates are summed.
  static CsrMatrix from_entries(std::int64_t rows, std::int64_t cols, std::vector<Entry> entries) {
    for (const Entry& e : entries) {
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
        throw ShapeError("sparse entry out of bounds");
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
    m.col_idx.reserve(entries.size());
    m.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!m.col_idx.empty() && i > 0 && entries[i].row == entries[i - 1].row &&
          entries[i].col == entries[i - 1].col) {
        m.values.back() += entries[i].value;
        continue;
      }
      m.col_idx.push_back(entries[i].col);
      m.values.push_back(entries[i].value);
      ++m.row_ptr[static_cast<std::size_t>(entries[i].row) + 1];
    }
    for (std::int64_t r = 0; r < rows; ++r) {
      m.row_ptr[static_cast<std::size_t>(r) + 1] += m.row_ptr[static_cast<std::size_t>(r)];
    }
    return m;
  }

  std::size_t nnz() const noexcept { return col_idx.size(); }

  std::int64_t row_nnz(std::int64_t r) const {
    return row_ptr[static_cast<std::size_t>(r) + 1] - row_ptr[static_cast<std::size_t>(r)];
  }

  std::span<const std::int32_t> row_cols(std::int64_t r) const {
    const auto b = static_cast<std::size_t>(row_ptr[static_cast<std::size_t>(r)]);
    return {col_idx.data() + b, static_cast<std::size_t>(row_nnz(r))};
  }

  std::span<const double> row_values(std::int64_t r) const {
    const auto b = static_cast<std::size_t>(row_ptr[static_cast<std::size_t>(r)]);
    return {values.data() + b, static_cast<std::size_t>(row_nnz(r))};
  }

  /// Stored value at (r, c), or 0 when the coordinate is structurally empty.
  double at(std::int64_t r, std::int64_t c) const {
    const auto cols_r = row_cols(r);
    const auto it = std::lower_bound(cols_r.begin(), cols_r.end(), static_cast<std::int32_t>(c));
    if (it == cols_r.end() || *it != c) return 0.0;
    return row_values(r)[static_cast<std::size_t>(it - cols_r.begin())];
  }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    out.reserve(nnz());
    for (std::int64_t r = 0; r < rows; ++r) {
      const auto c = row_cols(r);
      const auto v = row_values(r);
      for (std::size_t k = 0; k < c.size(); ++k) {
        out.push_back({static_cast<std::int32_t>(r), c[k], v[k]});
      }
    }
    return out;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(rows, cols);
    for (std::int64_t r = 0; r < rows; ++r) {
      const auto c = row_cols(r);
      const auto v = row_values(r);
      for (std::size_t k = 0; k < c.size(); ++k) d(r, c[k]) += v[k];
    }
    return d;
  }

  CsrMatrix transpose() const {
    std::vector<Entry> t = entries();
    for (Entry& e : t) std::swap(e.row, e.col);
    return from_entries(cols, rows, std::move(t));
  }

  bool operator==(const CsrMatrix&) const = default;
};

/// out = A * X with fixed-order row accumulation.
inline void csr_multiply(const CsrMatrix& a, const Matrix& x, Matrix& out) {
  if (a.cols != x.rows()) throw ShapeError("spmm: adjacency columns != embedding rows");
  out.setZero(a.rows, x.cols());
  for (std::int64_t r = 0; r < a.rows; ++r) {
    const auto c = a.row_cols(r);
    const auto v = a.row_values(r);
    auto dst = out.row(r);
    for (std::size_t k = 0; k < c.size(); ++k) dst.noalias() += v[k] * x.row(c[k]);
  }
}

/// out += A^T * G, scattering row by row.
inline void csr_transpose_multiply_add(const CsrMatrix& a, const Matrix& g, Matrix& out) {
  for (std::int64_t r = 0; r < a.rows; ++r) {
    const auto c = a.row_cols(r);
    const auto v = a.row_values(r);
    const auto src = g.row(r);
    for (std::size_t k = 0; k < c.size(); ++k) out.row(c[k]).noalias() += v[k] * src;
  }
}

}  // namespace orcdf
