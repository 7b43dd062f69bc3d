#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "orcdf/dataset.hpp"
#include "orcdf/error.hpp"
#include "orcdf/graph.hpp"
#include "orcdf/metrics.hpp"
#include "orcdf/numerics/optim.hpp"
#include "orcdf/numerics/rng.hpp"
#include "orcdf/numerics/tape.hpp"
#include "orcdf/rgc.hpp"
#include "orcdf/training.hpp"

namespace orcdf {

// ---------------------------------------------------------------------------
// Student-level split for adaptive testing.

struct StudentSplit {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> valid;
  std::vector<std::int32_t> test;
};

/// Shuffles the students that have logs and cuts them by `ratios`.
inline StudentSplit split_students(const Dataset& d, SplitRatios ratios, std::uint64_t seed) {
  ratios.validate();
  std::vector<char> has_logs(static_cast<std::size_t>(d.n_students()), 0);
  for (const auto& r : d.logs()) has_logs[static_cast<std::size_t>(r.student)] = 1;
  std::vector<std::int32_t> ids;
  for (std::int32_t s = 0; s < d.n_students(); ++s) {
    if (has_logs[static_cast<std::size_t>(s)]) ids.push_back(s);
  }
  Rng rng(seed, "student-split");
  rng.shuffle(std::span<std::int32_t>(ids));
  const auto n = static_cast<std::int64_t>(ids.size());
  const std::int64_t n_train = std::max<std::int64_t>(1, std::llround(static_cast<double>(n) * ratios.train));
  const std::int64_t n_valid = std::min<std::int64_t>(n - n_train, std::llround(static_cast<double>(n) * ratios.valid));
  StudentSplit out;
  out.train.assign(ids.begin(), ids.begin() + n_train);
  out.valid.assign(ids.begin() + n_train, ids.begin() + n_train + n_valid);
  out.test.assign(ids.begin() + n_train + n_valid, ids.end());
  for (auto* v : {&out.train, &out.valid, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

/// Keeps the responses of the listed students.
inline std::vector<Response> logs_of(std::span<const Response> logs, std::span<const std::int32_t> students) {
  const std::set<std::int32_t> keep(students.begin(), students.end());
  std::vector<Response> out;
  for (const auto& r : logs) {
    if (keep.count(r.student)) out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frozen encoder for a student outside the training graph.

/// Everything needed to embed and score one new student against a trained
/// model without touching its parameters. The student joins the training
/// graph as a node whose edges are its administered responses; exercise
/// states are those of the training graph, with degrees raised by one where
/// the new edge lands.
class StudentEncoder {
 public:
  static constexpr int kFitSteps = 25;
  static constexpr double kFitLr = 1e-2;

  StudentEncoder(const TrainedModel& model, const TrainingGraph& graph) : model_(&model) {
    Network& net = *model.net;
    n_students_ = net.n_students();
    n_exercises_ = net.n_exercises();
    variant_ = net.config().variant;
    const auto ex = static_cast<Eigen::Index>(n_students_);
    const auto m = static_cast<Eigen::Index>(n_exercises_);
    ex_latent_ = model.latent.middleRows(ex, m);
    if (model.concept_emb.size() != 0) ex_concept_ = model.concept_emb.middleRows(ex, m);
    if (variant_ == Variant::Ol) return;

    Tape tape(Tape::Options{false, true});
    const PooledEmbedding pooled = net.embed(tape, graph.view());
    for (const Var& layer : pooled.layers) states_.push_back(layer.value().middleRows(ex, m));
    auto degrees = [&](const NormalizedAdjacency& a) {
      return std::vector<double>(a.degree.begin() + ex, a.degree.begin() + ex + m);
    };
    if (variant_ == Variant::OrWithoutRgc) {
      deg_right_ = degrees(graph.undecomposed);
    } else {
      deg_right_ = degrees(graph.subgraphs.right);
      deg_wrong_ = degrees(graph.subgraphs.wrong);
    }
  }

  /// Initial base-embedding row of `student` (its untrained row in the model).
  Matrix initial_row(std::int32_t student) const { return model_->net->rgc().h0.value.row(student); }

  /// Sum of the propagated layers 1..L for a student with these responses.
  Matrix propagated_sum(std::span<const Response> administered) const {
    const auto d = static_cast<Eigen::Index>(model_->net->rgc().h0.cols());
    Matrix sum = Matrix::Zero(1, d);
    if (variant_ == Variant::Ol) return sum;
    const RgcParams& p = model_->net->rgc();
    const bool single = variant_ == Variant::OrWithoutRgc;
    double n_right = 0.0, n_wrong = 0.0;
    for (const auto& r : administered) (single || r.score ? n_right : n_wrong) += 1.0;
    for (int l = 1; l <= p.layers; ++l) {
      Matrix agg_r = Matrix::Zero(1, d), agg_w = Matrix::Zero(1, d);
      for (const auto& r : administered) {
        const auto e = static_cast<std::size_t>(r.exercise);
        const auto row = states_[static_cast<std::size_t>(l - 1)].row(r.exercise);
        if (single || r.score) {
          agg_r += row / std::sqrt(n_right * (deg_right_[e] + 1.0));
        } else {
          agg_w += row / std::sqrt(n_wrong * (deg_wrong_[e] + 1.0));
        }
      }
      Matrix pre = agg_r * p.w_rc.value;
      if (!single) pre += agg_w * p.w_wc.value;
      Tape tape(Tape::Options{false, true});
      sum += activate(tape.constant(pre), p.activation).value();
    }
    return sum;
  }

  /// Fine-tunes the student's base row on its administered responses
  /// (BCE, Adam) with every model parameter frozen.
  Matrix fit(std::int32_t student, const Matrix& start, std::span<const Response> administered,
             int steps = kFitSteps, double lr = kFitLr) const {
    Tensor row("cat.h0", start);
    if (administered.empty()) return row.value;
    const Matrix propagated = propagated_sum(administered);
    const ParameterList trainable{&row};
    Adam adam(trainable, Adam::Options{lr});
    std::vector<Response> batch = relabel(administered);
    const auto labels = labels_of(batch);
    for (int i = 0; i < steps; ++i) {
      Tape tape(Tape::Options{false, false, &trainable});
      const Var p = forward(tape, tape.leaf(row), propagated, student, batch);
      tape.backward(bce_sum(p, labels));
      adam.step();
    }
    return row.value;
  }

  /// Probability of a right answer on each of `items` for a student with
  /// base row `row` and the given administered responses.
  Vector predict(std::int32_t student, const Matrix& row, std::span<const Response> administered,
                 std::span<const Response> items) const {
    Tape tape(Tape::Options{false, true});
    const std::vector<Response> batch = relabel(items);
    return forward(tape, tape.constant(row), propagated_sum(administered), student, batch).value().col(0);
  }

 private:
  static std::vector<Response> relabel(std::span<const Response> logs) {
    std::vector<Response> out(logs.begin(), logs.end());
    for (auto& r : out) r.student = 0;
    return out;
  }

  Var forward(Tape& tape, Var base_row, const Matrix& propagated, std::int32_t student,
              std::span<const Response> batch) const {
    Network& net = *model_->net;
    const int layers = variant_ == Variant::Ol ? 0 : net.rgc().layers;
    const Var pooled = scale(add(base_row, tape.constant(propagated)), 1.0 / static_cast<double>(layers + 1));
    CdmInput in;
    in.n_students = 1;
    in.n_exercises = n_exercises_;
    const Var ex_latent = tape.constant(ex_latent_);
    const std::vector<Var> latent_parts{pooled, ex_latent};
    in.latent = concat_rows(latent_parts);
    if (ex_concept_.size() != 0) {
      Var concept_row = pooled;
      if (net.uses_transform()) {
        const TransformParams& t = net.transform_params();
        const Matrix bias = Matrix::Constant(1, t.w_t.cols(), t.b_t.value(student, 0));
        concept_row = add(matmul(pooled, tape.constant(t.w_t.value)), tape.constant(bias));
      }
      const std::vector<Var> concept_parts{concept_row, tape.constant(ex_concept_)};
      in.concept_emb = concat_rows(concept_parts);
    }
    return net.cdm().predict(tape, in, batch);
  }

  const TrainedModel* model_;
  std::int32_t n_students_ = 0;
  std::int32_t n_exercises_ = 0;
  Variant variant_ = Variant::Or;
  Matrix ex_latent_;
  Matrix ex_concept_;
  std::vector<Matrix> states_;  ///< exercise rows of H_F(0..L)
  std::vector<double> deg_right_;
  std::vector<double> deg_wrong_;
};

// ---------------------------------------------------------------------------
// Sessions and strategies.

/// One simulated test for one student.
class CatSession {
 public:
  CatSession(const StudentEncoder& encoder, std::int32_t student, std::vector<Response> candidates,
             std::vector<Response> evaluation, std::size_t budget)
      : encoder_(&encoder),
        student_(student),
        candidates_(std::move(candidates)),
        evaluation_(std::move(evaluation)),
        budget_(budget),
        row_(encoder.initial_row(student)) {
    for (const auto& r : candidates_) {
      if (r.student != student_) throw ContractError("cat: candidate belongs to another student");
      for (const auto& e : evaluation_) {
        if (e.exercise == r.exercise) throw ContractError("cat: exercise in both candidate and evaluation sets");
      }
    }
  }

  std::int32_t student() const noexcept { return student_; }
  std::size_t budget() const noexcept { return budget_; }
  const std::vector<Response>& candidates() const noexcept { return candidates_; }
  const std::vector<Response>& evaluation() const noexcept { return evaluation_; }
  const std::vector<Response>& administered() const noexcept { return administered_; }
  const Matrix& row() const noexcept { return row_; }

  bool is_administered(std::int32_t exercise) const {
    return std::any_of(administered_.begin(), administered_.end(),
                       [&](const Response& r) { return r.exercise == exercise; });
  }

  /// Candidates not yet administered.
  std::vector<std::int32_t> remaining() const {
    std::vector<std::int32_t> out;
    for (const auto& r : candidates_) {
      if (!is_administered(r.exercise)) out.push_back(r.exercise);
    }
    return out;
  }

  bool exhausted() const { return administered_.size() >= candidates_.size(); }

  /// Reveals the response to `exercise` and re-fits the student row.
  void administer(std::int32_t exercise) {
    if (administered_.size() >= budget_) throw ContractError("cat: step budget exhausted");
    if (is_administered(exercise)) throw ContractError("cat: exercise administered twice");
    const auto it = std::find_if(candidates_.begin(), candidates_.end(),
                                 [&](const Response& r) { return r.exercise == exercise; });
    if (it == candidates_.end()) throw ContractError("cat: exercise is not a candidate");
    administered_.push_back(*it);
    row_ = encoder_->fit(student_, row_, administered_);
  }

  Vector predict_evaluation() const { return encoder_->predict(student_, row_, administered_, evaluation_); }

 private:
  const StudentEncoder* encoder_;
  std::int32_t student_;
  std::vector<Response> candidates_;
  std::vector<Response> evaluation_;
  std::vector<Response> administered_;
  std::size_t budget_;
  Matrix row_;
};

/// Chooses the next exercise of a session.
class SelectionStrategy {
 public:
  virtual ~SelectionStrategy() = default;
  virtual std::string name() const = 0;
  /// Prepares for a new session (e.g. reseeds per student).
  virtual void begin(const CatSession& /*session*/) {}
  /// An unadministered candidate of `session`.
  virtual std::int32_t next(const CatSession& session) = 0;
};

/// Uniform choice among the remaining candidates.
class RandomStrategy final : public SelectionStrategy {
 public:
  explicit RandomStrategy(std::uint64_t seed) : seed_(seed), rng_(seed, "cat-random") {}

  std::string name() const override { return "random"; }

  void begin(const CatSession& session) override {
    rng_ = Rng(seed_, "cat-random", static_cast<std::uint64_t>(session.student()));
  }

  std::int32_t next(const CatSession& session) override {
    const auto left = session.remaining();
    if (left.empty()) throw ContractError("cat: no candidate left");
    return left[static_cast<std::size_t>(rng_.below(left.size()))];
  }

 private:
  std::uint64_t seed_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Simulation.

struct CatOptions {
  std::vector<std::size_t> steps{5, 10, 15};
  double candidate_share = 0.8;  ///< of each student's logs; the rest is evaluation
  std::uint64_t seed = 0;
};

struct CatStepReport {
  std::string strategy;
  std::size_t step = 0;
  double auc = 0.0;
  double acc = 0.0;
  std::uint64_t seed = 0;
  std::size_t truncated = 0;  ///< students whose pool ran out before this step
};

/// Splits one student's logs into candidates and evaluation items.
inline std::pair<std::vector<Response>, std::vector<Response>> meta_split(std::vector<Response> logs,
                                                                          double candidate_share,
                                                                          std::uint64_t seed,
                                                                          std::int32_t student) {
  if (candidate_share <= 0.0 || candidate_share >= 1.0) throw ConfigError("candidate share must lie in (0, 1)");
  Rng rng(seed, "cat-meta", static_cast<std::uint64_t>(student));
  rng.shuffle(std::span<Response>(logs));
  auto n_cand = static_cast<std::size_t>(std::llround(static_cast<double>(logs.size()) * candidate_share));
  n_cand = std::clamp<std::size_t>(n_cand, 1, logs.size() - 1);
  std::vector<Response> cand(logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(n_cand));
  std::vector<Response> eval(logs.begin() + static_cast<std::ptrdiff_t>(n_cand), logs.end());
  return {std::move(cand), std::move(eval)};
}

/// Runs one session per student and reports pooled AUC/ACC over the
/// evaluation items at each requested step.
inline std::vector<CatStepReport> run_cat(const StudentEncoder& encoder, std::span<const Response> logs,
                                          std::span<const std::int32_t> students, SelectionStrategy& strategy,
                                          const CatOptions& opts) {
  if (opts.steps.empty()) throw ConfigError("cat: no steps requested");
  std::vector<std::size_t> steps = opts.steps;
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  const std::size_t budget = steps.back();

  std::vector<std::vector<double>> scores(steps.size()), labels(steps.size());
  std::vector<std::size_t> truncated(steps.size(), 0);
  for (const std::int32_t s : students) {
    std::vector<Response> own;
    for (const auto& r : logs) {
      if (r.student == s) own.push_back(r);
    }
    if (own.size() < 2) continue;
    auto [cand, eval] = meta_split(std::move(own), opts.candidate_share, opts.seed, s);
    CatSession session(encoder, s, std::move(cand), std::move(eval), budget);
    strategy.begin(session);
    std::size_t k = 0;
    for (std::size_t t = 0; t <= budget; ++t) {
      if (t > 0) {
        if (session.exhausted()) {
          while (k < steps.size() && steps[k] >= t) {
            ++truncated[k];
            const Vector p = session.predict_evaluation();
            for (std::size_t i = 0; i < session.evaluation().size(); ++i) {
              scores[k].push_back(p[static_cast<Eigen::Index>(i)]);
              labels[k].push_back(session.evaluation()[i].score);
            }
            ++k;
          }
          break;
        }
        session.administer(strategy.next(session));
      }
      if (k < steps.size() && steps[k] == t) {
        const Vector p = session.predict_evaluation();
        for (std::size_t i = 0; i < session.evaluation().size(); ++i) {
          scores[k].push_back(p[static_cast<Eigen::Index>(i)]);
          labels[k].push_back(session.evaluation()[i].score);
        }
        ++k;
      }
    }
  }
  std::vector<CatStepReport> out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    CatStepReport r;
    r.strategy = strategy.name();
    r.step = steps[k];
    r.auc = auc(scores[k], labels[k]);
    r.acc = accuracy(scores[k], labels[k]);
    r.seed = opts.seed;
    r.truncated = truncated[k];
    out.push_back(r);
  }
  return out;
}

inline void write_cat_csv(std::ostream& out, std::span<const CatStepReport> rows) {
  out << "strategy,step,auc,acc,seed\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) out << r.strategy << ',' << r.step << ',' << r.auc << ',' << r.acc << ',' << r.seed << '\n';
  out.precision(old);
}

}  // namespace orcdf
