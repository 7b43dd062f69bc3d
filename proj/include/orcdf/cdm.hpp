#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orcdf/dataset.hpp"
#include "orcdf/error.hpp"
#include "orcdf/numerics/optim.hpp"
#include "orcdf/numerics/tape.hpp"

namespace orcdf {

/// Embeddings handed to a diagnosis model. Rows follow the response-graph
/// node order (students, exercises, concepts).
struct CdmInput {
  Var latent;   ///< pooled H, nodes x d
  Var concept_emb;  ///< transformed H_t, nodes x Z; unset for latent-factor models
  std::int32_t n_students = 0;
  std::int32_t n_exercises = 0;
};

/// Mastery output of a model. Only concept-indexed mastery is meaningful for
/// DOA and MND.
struct Mastery {
  Matrix values;
  bool concept_indexed = false;
};

enum class CdmKind { Ncdm, Irt };

inline std::string_view to_string(CdmKind k) { return k == CdmKind::Ncdm ? "ncdm" : "irt"; }

inline CdmKind cdm_from_string(std::string_view s) {
  if (s == "ncdm") return CdmKind::Ncdm;
  if (s == "irt") return CdmKind::Irt;
  throw ConfigError("unknown diagnosis model '" + std::string(s) + "'");
}

/// Interaction function: (student, exercise, concept) embeddings -> P(right).
class DiagnosisModel {
 public:
  virtual ~DiagnosisModel() = default;

  virtual CdmKind kind() const = 0;
  /// True when the model consumes concept-space (Z-wide) embeddings.
  virtual bool concept_indexed() const = 0;
  /// Width of the latent embedding rows the model reads.
  virtual std::int32_t latent_width() const = 0;

  /// One probability per batch entry, as a batch x 1 column.
  virtual Var predict(Tape& tape, const CdmInput& in, std::span<const Response> batch) = 0;

  /// Mastery of the first `n_students` rows.
  virtual Mastery mastery(const Matrix& latent, const Matrix& concept_emb, std::int32_t n_students) const = 0;

  virtual ParameterList parameters() = 0;

  /// Constraint projection applied after every optimizer step.
  virtual void project() {}
};

namespace detail {

inline void batch_rows(std::span<const Response> batch, std::int32_t n_students, std::vector<std::int32_t>& s,
                       std::vector<std::int32_t>& e) {
  s.resize(batch.size());
  e.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    s[i] = batch[i].student;
    e[i] = n_students + batch[i].exercise;
  }
}

inline double logistic(double v) {
  v = std::clamp(v, -40.0, 40.0);
  return 1.0 / (1.0 + std::exp(-v));
}

}  // namespace detail

/// Neural cognitive diagnosis: a monotone MLP over q_e * (Mas_s - Diff_e) * Disc_e.
///
/// Mas_s = sigma(H_t[s]), Diff_e = sigma(H_t[e]), Disc_e = sigma(H[e] w_disc + b_disc).
/// Tower widths 512 and 256 with sigmoid activations; tower weights are kept
/// nonnegative so the output is nondecreasing in every Mas coordinate.
class NcdmModel final : public DiagnosisModel {
 public:
  static constexpr std::int32_t kHidden1 = 512;
  static constexpr std::int32_t kHidden2 = 256;

  NcdmModel(const QMatrix& q, std::int32_t latent_width, Rng& rng,
            std::int32_t hidden1 = kHidden1, std::int32_t hidden2 = kHidden2)
      : q_(q.to_dense()), latent_width_(latent_width) {
    const auto z = q.n_concepts();
    w_disc_ = Tensor("ncdm.w_disc", xavier_init(latent_width, 1, rng));
    b_disc_ = Tensor("ncdm.b_disc", Matrix::Zero(1, 1));
    w1_ = Tensor("ncdm.w1", xavier_init(z, hidden1, rng));
    b1_ = Tensor("ncdm.b1", Matrix::Zero(1, hidden1));
    w2_ = Tensor("ncdm.w2", xavier_init(hidden1, hidden2, rng));
    b2_ = Tensor("ncdm.b2", Matrix::Zero(1, hidden2));
    w3_ = Tensor("ncdm.w3", xavier_init(hidden2, 1, rng));
    b3_ = Tensor("ncdm.b3", Matrix::Zero(1, 1));
    project();
    // Nonnegative weights push every hidden unit into saturation at start.
    // Centre each unit for inputs at the sigmoid midpoint instead.
    b2_.value = -0.5 * w2_.value.colwise().sum();
    b3_.value = -0.5 * w3_.value.colwise().sum();
  }

  CdmKind kind() const override { return CdmKind::Ncdm; }
  bool concept_indexed() const override { return true; }
  std::int32_t latent_width() const override { return latent_width_; }
  std::int32_t n_concepts() const { return static_cast<std::int32_t>(q_.cols()); }

  Var predict(Tape& tape, const CdmInput& in, std::span<const Response> batch) override {
    if (!in.concept_emb.valid()) throw ContractError("ncdm: concept-space embeddings required");
    if (in.concept_emb.cols() != q_.cols()) throw ShapeError("ncdm: concept embedding width != Z");
    if (in.latent.cols() != latent_width_) throw ShapeError("ncdm: latent embedding width mismatch");
    std::vector<std::int32_t> s, e;
    detail::batch_rows(batch, in.n_students, s, e);
    Matrix qb(static_cast<Eigen::Index>(batch.size()), q_.cols());
    for (std::size_t i = 0; i < batch.size(); ++i) qb.row(static_cast<Eigen::Index>(i)) = q_.row(batch[i].exercise);

    const Var mas = sigmoid(gather_rows(in.concept_emb, s));
    const Var diff = sigmoid(gather_rows(in.concept_emb, e));
    const Var disc =
        sigmoid(add_row_broadcast(matmul(gather_rows(in.latent, e), tape.leaf(w_disc_)), tape.leaf(b_disc_)));
    const Var x = mul_const(mul_col_broadcast(sub(mas, diff), disc), qb);
    return tower(tape, x);
  }

  Mastery mastery(const Matrix& /*latent*/, const Matrix& concept_emb, std::int32_t n_students) const override {
    return {concept_emb.topRows(n_students).unaryExpr([](double v) { return detail::logistic(v); }), true};
  }

  ParameterList parameters() override { return {&w_disc_, &b_disc_, &w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

  void project() override {
    w1_.value = w1_.value.cwiseMax(0.0);
    w2_.value = w2_.value.cwiseMax(0.0);
    w3_.value = w3_.value.cwiseMax(0.0);
  }

  /// Tower output for raw interaction inputs (rows of q * (mas - diff) * disc).
  Matrix interaction(const Matrix& x) const {
    auto sig = [](const Matrix& m) { return Matrix(m.unaryExpr([](double v) { return detail::logistic(v); })); };
    const Matrix h1 = sig((x * w1_.value).rowwise() + b1_.value.row(0));
    const Matrix h2 = sig((h1 * w2_.value).rowwise() + b2_.value.row(0));
    return sig((h2 * w3_.value).rowwise() + b3_.value.row(0));
  }

  /// Probability for explicit Mas/Diff/Disc values of one exercise.
  double predict_from_parts(const Eigen::RowVectorXd& mas, const Eigen::RowVectorXd& diff, double disc,
                            const Eigen::RowVectorXd& q_row) const {
    const Matrix x = ((mas - diff) * disc).cwiseProduct(q_row);
    return interaction(x)(0, 0);
  }

  const Tensor& w1() const { return w1_; }
  const Tensor& w2() const { return w2_; }
  const Tensor& w3() const { return w3_; }

 private:
  Var tower(Tape& tape, Var x) {
    const Var h1 = sigmoid(add_row_broadcast(matmul(x, tape.leaf(w1_)), tape.leaf(b1_)));
    const Var h2 = sigmoid(add_row_broadcast(matmul(h1, tape.leaf(w2_)), tape.leaf(b2_)));
    return sigmoid(add_row_broadcast(matmul(h2, tape.leaf(w3_)), tape.leaf(b3_)));
  }

  Matrix q_;
  std::int32_t latent_width_;
  Tensor w_disc_, b_disc_;
  Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

/// Two-parameter logistic IRT on projected embeddings:
///   theta = H[s] w_theta, b = H[e] w_b, a = H[e] w_a,
///   P(right) = sigma(exp(a) * (theta - b)).
class IrtModel final : public DiagnosisModel {
 public:
  IrtModel(std::int32_t latent_width, Rng& rng) : latent_width_(latent_width) {
    w_theta_ = Tensor("irt.w_theta", xavier_init(latent_width, 1, rng));
    w_b_ = Tensor("irt.w_b", xavier_init(latent_width, 1, rng));
    w_a_ = Tensor("irt.w_a", xavier_init(latent_width, 1, rng));
  }

  CdmKind kind() const override { return CdmKind::Irt; }
  bool concept_indexed() const override { return false; }
  std::int32_t latent_width() const override { return latent_width_; }

  Var predict(Tape& tape, const CdmInput& in, std::span<const Response> batch) override {
    if (in.latent.cols() != latent_width_) throw ShapeError("irt: latent embedding width mismatch");
    std::vector<std::int32_t> s, e;
    detail::batch_rows(batch, in.n_students, s, e);
    const Var hs = gather_rows(in.latent, s);
    const Var he = gather_rows(in.latent, std::move(e));
    const Var theta = matmul(hs, tape.leaf(w_theta_));
    const Var b = matmul(he, tape.leaf(w_b_));
    const Var a = matmul(he, tape.leaf(w_a_));
    return sigmoid(mul(exp(a), sub(theta, b)));
  }

  Mastery mastery(const Matrix& latent, const Matrix& /*concept_emb*/, std::int32_t n_students) const override {
    return {latent.topRows(n_students), false};
  }

  /// Scalar ability per student.
  Vector ability(const Matrix& latent, std::int32_t n_students) const {
    return latent.topRows(n_students) * w_theta_.value.col(0);
  }

  ParameterList parameters() override { return {&w_theta_, &w_b_, &w_a_}; }

 private:
  std::int32_t latent_width_;
  Tensor w_theta_, w_b_, w_a_;
};

inline std::unique_ptr<DiagnosisModel> make_model(CdmKind kind, const QMatrix& q, std::int32_t latent_width,
                                                  Rng& rng) {
  if (kind == CdmKind::Ncdm) return std::make_unique<NcdmModel>(q, latent_width, rng);
  return std::make_unique<IrtModel>(latent_width, rng);
}

/// Directional probing of NCDM monotonicity.
struct MonotonicityReport {
  std::size_t probes = 0;
  std::size_t violations = 0;
  double min_covered_delta = 0.0;     ///< smallest change after raising a covered concept
  double max_uncovered_delta = 0.0;   ///< largest |change| after raising an uncovered concept
  bool pass = false;
};

/// At each of `probes` random points, raises every covered Mas coordinate by
/// `step` in turn (the prediction must not drop) and one uncovered coordinate
/// (the prediction must not change).
inline MonotonicityReport monotonicity_check(const NcdmModel& model, Rng& rng, std::size_t probes = 100,
                                             double step = 0.1, double tol = 1e-12) {
  const auto z = model.n_concepts();
  MonotonicityReport rep;
  rep.min_covered_delta = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < probes; ++p) {
    Eigen::RowVectorXd mas(z), diff(z), q(z);
    for (std::int32_t k = 0; k < z; ++k) {
      mas[k] = rng.uniform();
      diff[k] = rng.uniform();
      q[k] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    const auto covered = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(z)));
    q[covered] = 1.0;
    const double disc = 0.05 + 0.95 * rng.uniform();
    const double base = model.predict_from_parts(mas, diff, disc, q);

    for (std::int32_t k = 0; k < z; ++k) {
      if (q[k] == 0.0) continue;
      Eigen::RowVectorXd up = mas;
      up[k] += step;
      const double dc = model.predict_from_parts(up, diff, disc, q) - base;
      rep.min_covered_delta = std::min(rep.min_covered_delta, dc);
      if (dc < -tol) ++rep.violations;
    }

    for (std::int32_t k = 0; k < z; ++k) {
      if (q[k] != 0.0) continue;
      Eigen::RowVectorXd other = mas;
      other[k] += step;
      const double du = model.predict_from_parts(other, diff, disc, q) - base;
      rep.max_uncovered_delta = std::max(rep.max_uncovered_delta, std::abs(du));
      if (du != 0.0) ++rep.violations;
      break;
    }
    ++rep.probes;
  }
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace orcdf
