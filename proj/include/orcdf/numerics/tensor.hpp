#pragma once

#include <string>
#include <utility>
#include <vector>

#include "orcdf/numerics/sparse.hpp"

namespace orcdf {

/// A named trainable matrix with an optional gradient buffer.
/// The gradient buffer is empty until a backward pass populates it.
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Tensor() = default;
  Tensor(std::string n, Matrix v, bool trainable = true)
      : name(std::move(n)), value(std::move(v)), requires_grad(trainable) {}

  Eigen::Index rows() const noexcept { return value.rows(); }
  Eigen::Index cols() const noexcept { return value.cols(); }

  bool has_grad() const noexcept {
    return grad.rows() == value.rows() && grad.cols() == value.cols();
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Non-owning list of parameters handed to the optimizer and the checkpoint writer.
using ParameterList = std::vector<Tensor*>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace orcdf
