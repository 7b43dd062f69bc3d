#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "orcdf/error.hpp"
#include "orcdf/numerics/rng.hpp"
#include "orcdf/numerics/tensor.hpp"

namespace orcdf {

/// Glorot-uniform initialization: U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
inline Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw ShapeError("xavier_init: dimensions must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

inline Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_init(rows, cols, rng);
}

/// Adam with bias correction. Moment buffers are keyed by position in the
/// parameter list, so the list must be stable across steps.
class Adam {
 public:
  struct Options {
    double lr = 4e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(ParameterList params) : Adam(std::move(params), Options{}) {}

  Adam(ParameterList params, Options opts) : params_(std::move(params)), opts_(opts) {
    for (const Tensor* p : params_) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }

  /// Applies one update to every trainable parameter, then zeroes the gradients.
  void step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      if (!p.requires_grad) continue;
      if (!p.has_grad()) throw ContractError("adam: parameter '" + p.name + "' has no gradient");
      m_[k] = opts_.beta1 * m_[k] + (1.0 - opts_.beta1) * p.grad;
      v_[k] = opts_.beta2 * v_[k] + (1.0 - opts_.beta2) * p.grad.cwiseAbs2();
      p.value.array() -= opts_.lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + opts_.eps);
      p.grad.setZero();
    }
  }

  std::int64_t steps() const noexcept { return step_; }
  const Options& options() const noexcept { return opts_; }
  void set_lr(double lr) noexcept { opts_.lr = lr; }

 private:
  ParameterList params_;
  Options opts_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
};

}  // namespace orcdf
